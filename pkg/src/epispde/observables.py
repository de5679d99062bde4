"""Extinction and permanence functionals, the total-mass bound, and log-linear
decay fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from .spatial import Grid, integrate

OBSERVABLES = ("mass_s", "mass_i", "mass_total", "perm", "perm_sq", "mass_i_pow_p")


class UnderflowError(ArithmeticError):
    """The ensemble mean hit zero inside a fit window."""

    def __init__(self, last_valid_time):
        super().__init__(f"underflow before window end; last valid time {last_valid_time!r}")
        self.last_valid_time = last_valid_time


def permanence_functional(i_field, grid: Grid):
    """``sqrt(int min(I^2, 1) dx)``; reduces the last axis."""
    return np.sqrt(integrate(np.minimum(np.square(i_field), 1.0), grid))


def sample_observables(s, i, grid: Grid, p: float = 0.5) -> dict[str, np.ndarray]:
    mass_s = integrate(s, grid)
    mass_i = integrate(i, grid)
    perm_sq = integrate(np.minimum(np.square(i), 1.0), grid)
    return {
        "mass_s": mass_s,
        "mass_i": mass_i,
        "mass_total": mass_s + mass_i,
        "perm": np.sqrt(perm_sq),
        "perm_sq": perm_sq,
        "mass_i_pow_p": np.power(mass_i, p),
    }


def time_average(values, times) -> float:
    """Trapezoidal time integral divided by the elapsed time."""
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if values.shape != times.shape:
        raise ValueError(f"values and times differ in length: {values.shape} vs {times.shape}")
    if len(times) < 2:
        raise ValueError("time_average needs at least 2 samples")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    return float(trapezoid(values, times) / (times[-1] - times[0]))


def mass_bound_reference(params, init_mass: float, t):
    """``exp(-mu_* t) * init_mass + sup(Lambda) / mu_*``, the bound on the
    expected total mass."""
    mu_star = float(np.min(np.minimum(params.mu1, params.mu2)))
    if not mu_star > 0:
        raise ValueError(f"bound requires mu_* > 0, got mu_* = {mu_star!r}")
    return np.exp(-mu_star * np.asarray(t, dtype=float)) * init_mass + np.max(params.lam) / mu_star


@dataclass(frozen=True)
class DecayFit:
    """``stderr`` combines the regression error with the Monte Carlo error
    of the fitted slope, when replicates were supplied."""

    slope: float
    intercept: float
    window: tuple[float, float]
    stderr: float
    n_samples: int
    ols_stderr: float = 0.0
    mc_stderr: float = 0.0


def _window(times, window):
    t_lo, t_hi = map(float, window)
    if not t_lo < t_hi:
        raise ValueError(f"empty fit window {window!r}")
    inside = (times >= t_lo - 1e-12) & (times <= t_hi + 1e-12)
    if inside.sum() < 10:
        raise ValueError(f"fit window {window!r} holds {inside.sum()} samples; need at least 10")
    return inside, (t_lo, t_hi)


def _log_in_window(t_win, m_win):
    bad = np.flatnonzero(~(m_win > 0))
    if bad.size:
        raise UnderflowError(t_win[bad[0] - 1] if bad[0] > 0 else None)
    return np.log(m_win)


def fit_decay_rate(times, means, window, replicate_means=None) -> DecayFit:
    """Least-squares slope of ``log(means)`` against ``times`` inside ``window``.

    ``means`` should already be an ensemble mean; the log is taken after
    averaging.  Residuals of a Monte Carlo mean are strongly correlated in
    time, so the regression error alone understates the uncertainty;
    ``replicate_means`` (leave-one-group-out means, one row per group) adds
    a jackknife estimate of the slope's sampling error.
    """
    times = np.asarray(times, dtype=float)
    means = np.asarray(means, dtype=float)
    inside, win = _window(times, window)
    t_win = times[inside]
    res = stats.linregress(t_win, _log_in_window(t_win, means[inside]))
    ols = float(res.stderr)
    mc = 0.0
    if replicate_means is not None and len(replicate_means) >= 2:
        reps = np.asarray(replicate_means, dtype=float)[:, inside]
        slopes = np.array([stats.linregress(t_win, _log_in_window(t_win, r)).slope for r in reps])
        g = len(slopes)
        mc = float(np.sqrt((g - 1) / g * np.sum((slopes - slopes.mean()) ** 2)))
    return DecayFit(float(res.slope), float(res.intercept), win, float(np.hypot(ols, mc)),
                    int(inside.sum()), ols, mc)
