"""Monte Carlo ensembles with mergeable per-time statistics, and threshold
sweeps that compare empirical verdicts with the theoretical predictions."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
import multiprocessing
from dataclasses import dataclass, field, replace

import numpy as np

from .model import ThresholdReport, compute_thresholds, constant_field
from .noise import NoiseSpec
from .observables import OBSERVABLES, DecayFit, UnderflowError, fit_decay_rate, time_average
from .stepper import NumericalFailure, simulate_paths

DEFAULT_BLOCK = 64
N_GROUPS = 16


@dataclass
class EnsembleStats:
    """Count, mean, sum of squared deviations, min and max of each observable
    at each recorded time.

    Paths are also assigned to ``n_groups`` jackknife groups by path index
    modulo ``n_groups``; per-group sums give Monte Carlo errors for nonlinear
    functionals of the means such as fitted log-slopes.
    """

    times: np.ndarray
    count: np.ndarray
    mean: dict[str, np.ndarray]
    m2: dict[str, np.ndarray]
    min: dict[str, np.ndarray]
    max: dict[str, np.ndarray]
    group_count: np.ndarray = None
    group_sum: dict[str, np.ndarray] = None
    clipped: int = 0
    cell_steps: int = 0

    @classmethod
    def empty(cls, times, names=OBSERVABLES, n_groups: int = N_GROUPS) -> "EnsembleStats":
        times = np.asarray(times, dtype=float)
        z = lambda fill: {k: np.full(times.shape, fill) for k in names}
        return cls(times, np.zeros(times.shape, dtype=np.int64), z(0.0), z(0.0), z(np.inf),
                   z(-np.inf), np.zeros(n_groups, dtype=np.int64),
                   {k: np.zeros((n_groups,) + times.shape) for k in names})

    @classmethod
    def from_samples(cls, times, samples: dict[str, np.ndarray], path_index=None,
                     clipped: int = 0, cell_steps: int = 0, n_groups: int = N_GROUPS) -> "EnsembleStats":
        """Two-pass statistics over arrays of shape ``(paths, len(times))``.

        ``path_index`` gives the global index of each row (default 0, 1, ...).
        """
        times = np.asarray(times, dtype=float)
        mean, m2, lo, hi, gsum = {}, {}, {}, {}, {}
        n = 0
        groups = None
        for name, x in samples.items():
            x = np.atleast_2d(np.asarray(x, dtype=float))
            if x.shape[1] != len(times):
                raise ValueError(f"{name} has {x.shape[1]} samples per path, expected {len(times)}")
            n = x.shape[0]
            if groups is None:
                idx = np.arange(n) if path_index is None else np.asarray(path_index)
                groups = idx % n_groups
            mean[name] = x.mean(axis=0)
            m2[name] = np.sum((x - mean[name]) ** 2, axis=0)
            lo[name] = x.min(axis=0)
            hi[name] = x.max(axis=0)
            g = np.zeros((n_groups, len(times)))
            np.add.at(g, groups, x)
            gsum[name] = g
        gcount = np.bincount(groups, minlength=n_groups).astype(np.int64)
        return cls(times, np.full(times.shape, n, dtype=np.int64), mean, m2, lo, hi,
                   gcount, gsum, int(clipped), int(cell_steps))

    @property
    def names(self):
        return tuple(self.mean)

    @property
    def n_paths(self) -> int:
        return int(self.count[0]) if len(self.count) else 0

    def variance(self, name: str) -> np.ndarray:
        """Unbiased sample variance; NaN where fewer than two paths."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.count > 1, self.m2[name] / (self.count - 1), np.nan)

    def stderr(self, name: str) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.sqrt(self.variance(name) / self.count)

    def jackknife_means(self, name: str) -> np.ndarray:
        """Leave-one-group-out means, shape ``(groups, len(times))``, over the
        nonempty groups; empty when fewer than two groups are populated."""
        keep = self.group_count > 0
        if keep.sum() < 2:
            return np.empty((0, len(self.times)))
        total = self.group_sum[name][keep].sum(axis=0)
        rest = self.group_count.sum() - self.group_count[keep]
        return (total - self.group_sum[name][keep]) / rest[:, None]

    @property
    def clip_fraction(self) -> float:
        return self.clipped / self.cell_steps if self.cell_steps else 0.0

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        return merge_stats(self, other)


def merge_stats(a: EnsembleStats, b: EnsembleStats) -> EnsembleStats:
    """Pairwise (Chan et al.) combination of two disjoint ensembles."""
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise ValueError("cannot merge statistics recorded on different time grids")
    if set(a.names) != set(b.names):
        raise ValueError("cannot merge statistics of different observables")
    if a.group_count.shape != b.group_count.shape:
        raise ValueError("cannot merge statistics with different jackknife group counts")
    n = a.count + b.count
    safe_n = np.where(n > 0, n, 1)
    wb = b.count / safe_n
    mean, m2, lo, hi, gsum = {}, {}, {}, {}, {}
    for k in a.names:
        delta = b.mean[k] - a.mean[k]
        mean[k] = a.mean[k] + delta * wb
        m2[k] = a.m2[k] + b.m2[k] + delta**2 * a.count * wb
        lo[k] = np.minimum(a.min[k], b.min[k])
        hi[k] = np.maximum(a.max[k], b.max[k])
        gsum[k] = a.group_sum[k] + b.group_sum[k]
    return EnsembleStats(a.times.copy(), n, mean, m2, lo, hi, a.group_count + b.group_count, gsum,
                         a.clipped + b.clipped, a.cell_steps + b.cell_steps)


def ensemble_decay_fit(stats: EnsembleStats, name: str, window) -> DecayFit:
    """Log-slope of the ensemble mean of ``name`` with jackknife Monte Carlo error."""
    return fit_decay_rate(stats.times, stats.mean[name], window,
                          replicate_means=stats.jackknife_means(name))


def default_workers() -> int:
    env = os.environ.get("EPISPDE_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"EPISPDE_THREADS must be a positive integer, got {env!r}") from None
        if value < 1:
            raise ValueError(f"EPISPDE_THREADS must be a positive integer, got {env!r}")
        return value
    return os.cpu_count() or 1


class PathFailure(RuntimeError):
    def __init__(self, path: int, step: int, detail: str):
        super().__init__(f"path {path} failed at step {step}: {detail}")
        self.path, self.step = path, step


def _run_block(config, first: int, count: int) -> EnsembleStats:
    paths = np.arange(first, first + count)
    try:
        traj = simulate_paths(config.initial_state(), config.params, config.noise, config.step,
                              config.horizon, config.grid, config.seed, paths, p=config.analysis.p)
    except NumericalFailure as exc:
        path = first if exc.path is None else first + exc.path
        raise PathFailure(int(path), exc.step, str(exc)) from exc
    return EnsembleStats.from_samples(traj.times, traj.observables, paths,
                                      int(traj.clipped.sum()), traj.cell_steps * count)


def run_ensemble(config, n_paths: int | None = None, first_path: int = 0,
                 workers: int | None = None, block_size: int = DEFAULT_BLOCK) -> EnsembleStats:
    """Simulate paths ``first_path, ..., first_path + n_paths - 1`` and reduce.

    Paths are grouped in fixed blocks of ``block_size`` consecutive indices
    and reduced in block order, so the result is bit-identical for every
    worker count.
    """
    n_paths = config.n_paths if n_paths is None else n_paths
    if n_paths < 1:
        raise ValueError("run_ensemble needs n_paths >= 1")
    workers = default_workers() if workers is None else workers
    blocks = [(b, min(block_size, first_path + n_paths - b))
              for b in range(first_path, first_path + n_paths, block_size)]
    if workers <= 1 or len(blocks) == 1:
        parts = [_run_block(config, b, c) for b, c in blocks]
    else:
        ctx = multiprocessing.get_context("fork") if hasattr(os, "fork") else None
        with ProcessPoolExecutor(max_workers=min(workers, len(blocks)), mp_context=ctx) as pool:
            parts = list(pool.map(_run_block, [config] * len(blocks),
                                  [b for b, _ in blocks], [c for _, c in blocks]))
    stats = parts[0]
    for part in parts[1:]:
        stats = merge_stats(stats, part)
    return stats


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class SweepRow:
    value: float
    report: ThresholdReport
    prediction: str
    verdict: str
    slope: float
    slope_stderr: float
    perm_averages: tuple[float, ...]


@dataclass
class SweepResult:
    param: str
    rows: list[SweepRow] = field(default_factory=list)


_RATE_FIELDS = {"alpha": "alpha", "lambda": "lam", "mu1": "mu1", "mu2": "mu2"}


def with_parameter(config, name: str, value: float):
    """Copy of ``config`` with one parameter set; rate fields become constant."""
    if name in _RATE_FIELDS:
        params = config.params.replace(**{_RATE_FIELDS[name]: constant_field(config.grid, value)})
        return replace(config, params=params)
    if name in ("k1", "k2"):
        return replace(config, params=config.params.replace(**{name: value}))
    if name in ("sigma1", "sigma2"):
        if not config.noise.is_space_independent:
            raise ValueError(f"{name} can only be swept with space-independent noise")
        sig = list(config.noise.sigmas)
        sig[int(name[-1]) - 1] = value
        return replace(config, noise=NoiseSpec.space_independent(*sig))
    raise ValueError(f"cannot sweep unknown parameter {name!r}")


def classify(stats_by_ic, window, eps_slope: float, eps_perm: float, ic_ratio: float = 2.0):
    """Empirical verdict from one ensemble per initial condition.

    ``extinct`` when ``ln E int I`` falls faster than ``eps_slope`` with two
    standard errors to spare for every initial condition; ``permanent`` when
    the windowed permanence average exceeds ``eps_perm`` for every initial
    condition and the averages agree within ``ic_ratio``; otherwise
    ``inconclusive``.  Returns ``(verdict, slope, stderr, perm_averages)``
    with the slope of the first initial condition.
    """
    slopes, errs, perms = [], [], []
    for stats in stats_by_ic:
        try:
            fit = ensemble_decay_fit(stats, "mass_i", window)
            slopes.append(fit.slope)
            errs.append(fit.stderr)
        except UnderflowError:
            slopes.append(-math.inf)
            errs.append(0.0)
        inside = (stats.times >= window[0] - 1e-12) & (stats.times <= window[1] + 1e-12)
        perm = np.sqrt(stats.mean["perm_sq"][inside])
        perms.append(time_average(perm, stats.times[inside]))
    if all(s + 2 * e < -eps_slope for s, e in zip(slopes, errs)):
        verdict = "extinct"
    elif min(perms) > eps_perm and max(perms) <= ic_ratio * min(perms):
        verdict = "permanent"
    else:
        verdict = "inconclusive"
    return verdict, slopes[0], errs[0], tuple(perms)


def sweep(config, param: str, values, n_paths: int | None = None, horizon: float | None = None,
          initial_infected=None, workers: int | None = None) -> SweepResult:
    """Run an ensemble for every parameter value and classify it.

    ``initial_infected`` lists constant initial infected densities to test;
    by default the config's own initial condition (plus any listed in its
    analysis section) is used.
    """
    if horizon is not None:
        config = replace(config, horizon=horizon)
    an = config.analysis
    window = (an.window_frac * config.horizon, config.horizon)
    if initial_infected is None:
        initial_infected = an.perm_i0
    result = SweepResult(param)
    for value in np.atleast_1d(np.asarray(values, dtype=float)):
        cfg = with_parameter(config, param, float(value))
        report = compute_thresholds(cfg.params, cfg.noise, cfg.grid)
        prediction = report.prediction(cfg.noise.is_space_independent)
        ics = [cfg] if not initial_infected else [
            replace(cfg, i0=constant_field(cfg.grid, v)) for v in initial_infected]
        stats = [run_ensemble(c, n_paths, workers=workers) for c in ics]
        verdict, slope, err, perms = classify(stats, window, an.eps_slope, an.eps_perm, an.ic_ratio)
        result.rows.append(SweepRow(float(value), report, prediction, verdict, slope, err, perms))
    return result
