"""Q-Wiener noise: truncated cosine expansions, exact covariance, and
coordinate-addressed normal variates.

Mode ``k`` of species ``i`` contributes ``sqrt(a_k dt) xi_k e_k(x)`` to an
increment, with ``e_0 = 1`` and ``e_k = sqrt(2) cos(k pi x)``.  The normals
``xi`` come from a Philox4x32-10 counter generator keyed by the master seed
and addressed by (step, mode, path, species), so any subset of draws can be
reproduced without generating the others.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

from . import _kernels
from .spatial import Grid

SQRT2 = np.sqrt(2.0)
# sup_k max_x |e_k(x)| for the cosine basis
BASIS_BOUND = SQRT2

_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_PHILOX_W0 = 0x9E3779B9
_PHILOX_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10):
    """Philox4x32 block function on arrays of 32-bit words.

    ``counter`` is four broadcast-compatible integer arrays, ``key`` two
    integers.  Returns four ``uint64`` arrays holding 32-bit outputs.
    """
    c0, c1, c2, c3 = np.broadcast_arrays(*(np.asarray(c, dtype=np.uint64) for c in counter))
    c0, c1, c2, c3 = (c & _MASK32 for c in (c0, c1, c2, c3))
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(rounds):
        if r:
            k0 = (k0 + _PHILOX_W0) & 0xFFFFFFFF
            k1 = (k1 + _PHILOX_W1) & 0xFFFFFFFF
        p0 = _PHILOX_M0 * c0
        p1 = _PHILOX_M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT32) ^ c1 ^ np.uint64(k0),
            p1 & _MASK32,
            (p0 >> _SHIFT32) ^ c3 ^ np.uint64(k1),
            p0 & _MASK32,
        )
    return c0, c1, c2, c3


def _unit_interval(hi, lo):
    # 53-bit uniform on [0, 1) from two 32-bit words
    a = (hi >> np.uint64(5)).astype(np.float64)
    b = (lo >> np.uint64(6)).astype(np.float64)
    return (a * 67108864.0 + b) / 9007199254740992.0


@dataclass(frozen=True)
class RngStream:
    """Standard normals addressed by coordinates rather than by call order."""

    seed: int

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def normals(self, step: int, species: int, n_modes: int, paths=0) -> np.ndarray:
        """Normals of shape ``(*shape(paths), n_modes)`` for one time step."""
        if not 0 <= step < 2**32:
            raise ValueError(f"step index out of range: {step}")
        paths = np.asarray(paths, dtype=np.int64)
        z = _kernels.philox_normals(np.uint64(self.seed & 0xFFFFFFFF), np.uint64(self.seed >> 32),
                                    step, species, paths.reshape(-1), n_modes)
        return z.reshape(paths.shape + (n_modes,))

    def normals_reference(self, step: int, species: int, n_modes: int, paths=0) -> np.ndarray:
        """Pure numpy evaluation of :meth:`normals`, kept as a cross-check."""
        paths = np.asarray(paths, dtype=np.uint64)
        blocks = np.arange((n_modes + 1) // 2, dtype=np.uint64)
        x0, x1, x2, x3 = philox4x32(
            (np.uint64(step), blocks, paths[..., None], np.uint64(species)),
            (self.seed & 0xFFFFFFFF, self.seed >> 32),
        )
        u1 = _unit_interval(x0, x1)
        u2 = _unit_interval(x2, x3)
        radius = np.sqrt(-2.0 * np.log1p(-u1))
        angle = 2.0 * np.pi * u2
        z = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
        return z.reshape(*z.shape[:-2], -1)[..., :n_modes]


@dataclass(frozen=True)
class CoefficientFamily:
    """Closed-form mode variances: ``a q^k`` (geometric) or ``a/(k+1)^r``
    (polynomial)."""

    kind: str
    a: float
    rate: float

    def __post_init__(self):
        if self.kind not in ("geometric", "polynomial"):
            raise ValueError(f"unknown coefficient family {self.kind!r}")
        if not (np.isfinite(self.a) and self.a >= 0):
            raise ValueError(f"family amplitude must be finite and >= 0, got {self.a!r}")
        if self.kind == "geometric" and not 0 <= self.rate < 1:
            raise ValueError(f"family parameters outside convergence region: geometric q = {self.rate!r}")
        if self.kind == "polynomial" and not self.rate > 1:
            raise ValueError(f"family parameters outside convergence region: polynomial r = {self.rate!r}")

    @classmethod
    def geometric(cls, a: float, q: float) -> "CoefficientFamily":
        return cls("geometric", a, q)

    @classmethod
    def polynomial(cls, a: float, r: float) -> "CoefficientFamily":
        return cls("polynomial", a, r)

    def coefficients(self, K: int) -> np.ndarray:
        k = np.arange(K, dtype=float)
        if self.kind == "geometric":
            return self.a * self.rate**k
        return self.a / (k + 1.0) ** self.rate

    def trace(self) -> float:
        if self.kind == "geometric":
            return self.a / (1.0 - self.rate)
        return self.a * float(zeta(self.rate, 1.0))

    def tail(self, K: int) -> float:
        """``sum_{k >= K} a_k``."""
        if self.kind == "geometric":
            return self.a * self.rate**K / (1.0 - self.rate)
        return self.a * float(zeta(self.rate, K + 1.0))


@dataclass(frozen=True)
class NoiseSpec:
    """Noise on both classes; build with :meth:`kl`, :meth:`space_independent`
    or :meth:`zero`.

    ``tail_tol`` bounds the discarded variance relative to the full trace.
    """

    mode: str
    families: tuple = (None, None)
    truncation: tuple = (1, 1)
    sigmas: tuple = (0.0, 0.0)
    tail_tol: float = 1e-6

    def __post_init__(self):
        if self.mode not in ("kl", "space_independent"):
            raise ValueError(f"unknown noise mode {self.mode!r}")
        if self.mode == "space_independent":
            for sig in self.sigmas:
                if not (np.isfinite(sig) and sig >= 0):
                    raise ValueError(f"noise intensity must be finite and >= 0, got {sig!r}")
            return
        for species in (1, 2):
            K = self.truncation[species - 1]
            if int(K) != K or K < 1:
                raise ValueError(f"truncation K must be an integer >= 1, got {K!r}")
            a_i, tail = self.trace(species)
            if tail > self.tail_tol * a_i:
                raise ValueError(
                    f"truncation tail {tail:.3g} for species {species} exceeds "
                    f"tail_tol * trace = {self.tail_tol * a_i:.3g}; raise K")

    @classmethod
    def kl(cls, family1: CoefficientFamily | None, family2: CoefficientFamily | None = None,
           K: int = 20, K2: int | None = None, tail_tol: float = 1e-6) -> "NoiseSpec":
        """Same family on both classes unless ``family2`` is given."""
        if family2 is None:
            family2 = family1
        return cls("kl", (family1, family2), (K, K if K2 is None else K2), (0.0, 0.0), tail_tol)

    @classmethod
    def space_independent(cls, sigma1: float, sigma2: float) -> "NoiseSpec":
        return cls("space_independent", sigmas=(float(sigma1), float(sigma2)))

    @classmethod
    def zero(cls) -> "NoiseSpec":
        return cls.space_independent(0.0, 0.0)

    @property
    def is_space_independent(self) -> bool:
        return self.mode == "space_independent"

    def n_modes(self, species: int) -> int:
        if self.mode == "space_independent":
            return 1
        return int(self.truncation[species - 1])

    def coefficients(self, species: int) -> np.ndarray:
        """Retained mode variances ``a_{k,i}``, ``k < K``."""
        if self.mode == "space_independent":
            return np.array([self.sigmas[species - 1] ** 2])
        fam = self.families[species - 1]
        if fam is None:
            return np.zeros(self.n_modes(species))
        return fam.coefficients(self.n_modes(species))

    def trace(self, species: int) -> tuple[float, float]:
        """Full trace ``a_i`` and the variance discarded by truncation."""
        if self.mode == "space_independent":
            return self.sigmas[species - 1] ** 2, 0.0
        fam = self.families[species - 1]
        if fam is None:
            return 0.0, 0.0
        return fam.trace(), fam.tail(self.n_modes(species))


def eigenbasis_eval(k, x):
    """Neumann cosine basis ``e_0 = 1``, ``e_k = sqrt(2) cos(k pi x)``."""
    k = np.asarray(k)
    x = np.asarray(x, dtype=float)
    return np.where(k == 0, 1.0, SQRT2 * np.cos(k * np.pi * x))


def basis_matrix(K: int, grid: Grid) -> np.ndarray:
    """``e_k(x_j)`` as a ``(K, n)`` array."""
    return eigenbasis_eval(np.arange(K)[:, None], grid.centers[None, :])


def point_map(spec: NoiseSpec, species: int, x) -> np.ndarray:
    """``(K, len(x))`` matrix taking unit normals to unit-time increments at
    the points ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    coef = spec.coefficients(species)
    if spec.mode == "space_independent":
        return np.full((1, len(x)), np.sqrt(coef[0]))
    return np.sqrt(coef)[:, None] * eigenbasis_eval(np.arange(len(coef))[:, None], x[None, :])


def increment_map(spec: NoiseSpec, species: int, grid: Grid) -> np.ndarray:
    """``(K, n)`` matrix taking unit normals to a unit-time increment field."""
    return point_map(spec, species, grid.centers)


def increment_from_normals(spec: NoiseSpec, species: int, dt: float, grid: Grid,
                           xi: np.ndarray) -> np.ndarray:
    return np.sqrt(dt) * (np.asarray(xi) @ increment_map(spec, species, grid))


def sample_increment(spec: NoiseSpec, species: int, dt: float, grid: Grid,
                     rng: RngStream, step: int = 0, paths=0) -> np.ndarray:
    """One increment ``W_i(t + dt) - W_i(t)`` on the grid.

    ``paths`` may be an array of path indices, giving a leading batch axis.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    xi = rng.normals(step, species, spec.n_modes(species), paths)
    return increment_from_normals(spec, species, dt, grid, xi)


def sample_increment_at(spec: NoiseSpec, species: int, dt: float, x, rng: RngStream,
                        step: int = 0, paths=0) -> np.ndarray:
    """Like :func:`sample_increment` but evaluated at arbitrary points ``x``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    xi = rng.normals(step, species, spec.n_modes(species), paths)
    return np.sqrt(dt) * (xi @ point_map(spec, species, x))


def covariance(spec: NoiseSpec, x, y, t: float, species: int = 2):
    """``E[W_i(t, x) W_i(t, y)]`` of the truncated process."""
    if spec.mode == "space_independent":
        return t * spec.sigmas[species - 1] ** 2 * np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)[()]
    coef = spec.coefficients(species)
    k = np.arange(len(coef))
    ex = eigenbasis_eval(k, np.asarray(x, dtype=float)[..., None])
    ey = eigenbasis_eval(k, np.asarray(y, dtype=float)[..., None])
    return t * np.sum(coef * ex * ey, axis=-1)


def trace(spec: NoiseSpec, species: int) -> tuple[float, float]:
    return spec.trace(species)
