"""Parameters, reaction terms and threshold quantities of the diffusive SIR system.

Fields are plain float arrays sized to a :class:`~epispde.spatial.Grid`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spatial import Grid, integrate

DEFAULT_P = 0.5


def constant_field(grid: Grid, value: float) -> np.ndarray:
    return np.full(grid.n, float(value))


def cosine_field(grid: Grid, base: float, amp: float, mode: int = 1) -> np.ndarray:
    """``base + amp * cos(mode * pi * x)`` sampled at cell centres."""
    return base + amp * np.cos(mode * np.pi * grid.centers)


@dataclass(frozen=True)
class SystemState:
    """Susceptible and infected densities at time ``t``.

    ``s`` and ``i`` are either single fields of shape ``(n,)`` or a batch of
    independent paths of shape ``(paths, n)``.
    """

    s: np.ndarray
    i: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        i = np.asarray(self.i, dtype=float)
        if s.shape != i.shape:
            raise ValueError(f"S and I live on different grids: {s.shape} vs {i.shape}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "i", i)


@dataclass(frozen=True)
class ModelParams:
    lam: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    alpha: np.ndarray
    k1: float
    k2: float

    @classmethod
    def constant(cls, grid: Grid, lam: float, mu1: float, mu2: float, alpha: float,
                 k1: float = 0.01, k2: float = 0.01) -> "ModelParams":
        return cls(*(constant_field(grid, v) for v in (lam, mu1, mu2, alpha)), k1=k1, k2=k2)

    def rate_fields(self) -> dict[str, np.ndarray]:
        return {"lambda": self.lam, "mu1": self.mu1, "mu2": self.mu2, "alpha": self.alpha}

    def replace(self, **changes) -> "ModelParams":
        kw = dict(lam=self.lam, mu1=self.mu1, mu2=self.mu2, alpha=self.alpha,
                  k1=self.k1, k2=self.k2)
        kw.update(changes)
        return ModelParams(**kw)


def validate_params(params: ModelParams, grid: Grid) -> ModelParams:
    """Return ``params`` unchanged, or raise ``ValueError`` naming the first
    violated invariant."""
    for name, values in params.rate_fields().items():
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.shape[0] != grid.n:
            raise ValueError(f"size mismatch: {name} has shape {values.shape}, grid has {grid.n} cells")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"NaN or infinite value in {name}")
        if np.any(values < 0):
            j = int(np.argmin(values))
            raise ValueError(f"negative rate: {name}[{j}] = {values[j]!r}")
    for name in ("k1", "k2"):
        k = getattr(params, name)
        if not np.isfinite(k):
            raise ValueError(f"NaN or infinite diffusivity {name}")
        if k <= 0:
            raise ValueError(f"nonpositive diffusivity: {name} = {k!r}")
    return params


def incidence(s, i):
    """``s*i/(s+i)`` with negatives clamped to 0 and the value 0 whenever
    either argument is 0.

    Evaluated as ``min(s, i) * (max(s, i) / (s + i))`` so that the ratio
    stays in [1/2, 1] and nothing cancels for tiny densities.
    """
    s = np.maximum(s, 0.0)
    i = np.maximum(i, 0.0)
    total = s + i
    ratio = np.divide(np.maximum(s, i), total, out=np.zeros_like(total), where=total > 0)
    return np.minimum(s, i) * ratio


def reaction_terms(s, i, lam, m1, m2, al):
    """Truncated drift ``(f1, f2)`` of the system, evaluated at ``(s v 0, i v 0)``.

    Works elementwise on scalars or arrays.
    """
    if np.any(np.isnan(s)) or np.any(np.isnan(i)):
        raise ValueError("NaN density passed to reaction_terms")
    inc = al * incidence(s, i)
    s = np.maximum(s, 0.0)
    i = np.maximum(i, 0.0)
    f1 = lam - m1 * s - inc
    f2 = -m2 * i + inc
    return f1, f2


@dataclass(frozen=True)
class ThresholdReport:
    r_hat: float
    mu2_minus_alpha_star: float
    mu_star: float
    lambda_star: float
    a2: float
    a2_tail: float = 0.0
    r_p: float | None = None
    p: float | None = None

    def prediction(self, space_independent: bool = False, tol: float = 1e-12) -> str:
        """Classify by the sufficient conditions: ``extinct-predicted``,
        ``permanent-predicted``, ``boundary`` or ``undetermined``."""
        if self.mu2_minus_alpha_star > tol:
            return "extinct-predicted"
        if space_independent and self.mu2_minus_alpha_star + self.a2 / 2 > tol:
            return "extinct-predicted"
        if self.r_hat > tol and self.lambda_star > 0:
            return "permanent-predicted"
        if abs(self.r_hat) <= tol:
            return "boundary"
        return "undetermined"


def compute_thresholds(params: ModelParams, noise, grid: Grid, p: float | None = None) -> ThresholdReport:
    """Threshold constants for ``params`` under ``noise`` on the unit interval.

    ``p`` requests the p-th moment extinction rate, which only exists for
    space-independent noise on the infected class.
    """
    validate_params(params, grid)
    if not np.isclose(grid.n * grid.h, 1.0, rtol=0, atol=1e-12):
        raise ValueError("thresholds assume a domain of unit volume")
    a2, tail2 = noise.trace(2)
    diff = np.asarray(params.mu2) - np.asarray(params.alpha)
    report = dict(
        r_hat=float(integrate(params.alpha, grid) - integrate(params.mu2, grid) - a2 / 2),
        mu2_minus_alpha_star=float(np.min(diff)),
        mu_star=float(np.min(np.minimum(params.mu1, params.mu2))),
        lambda_star=float(np.min(params.lam)),
        a2=float(a2),
        a2_tail=float(tail2),
    )
    if p is not None:
        if not noise.is_space_independent:
            raise ValueError("R_p requires space-independent noise")
        if not 0 < p < 1:
            raise ValueError(f"moment exponent p must lie in (0, 1), got {p!r}")
        report["r_p"] = report["mu2_minus_alpha_star"] + (1 - p) * a2 / 2
        report["p"] = float(p)
    return ThresholdReport(**report)
