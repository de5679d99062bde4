"""Exponential Euler-Maruyama integration of the mild formulation.

One step of size ``dt`` maps ``(S, I)`` to

    S+ = max(exp(dt A1) [S + dt F1(S, I) + S dW1], 0)
    I+ = max(exp(dt A2) [I + dt F2(S, I) + I dW2], 0)

with the noise evaluated at the start of the step (Ito).  All routines
accept a leading batch axis of independent paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .model import ModelParams, SystemState, validate_params
from .noise import NoiseSpec, RngStream, increment_map
from .observables import sample_observables
from .spatial import ROUNDOFF_CLAMP, DiscreteSemigroup, Grid


class NumericalFailure(ArithmeticError):
    """A step produced a non-finite value, usually because ``dt`` is too
    large for the noise intensity."""

    def __init__(self, step: int, cell: int, path: int | None = None):
        where = f"step {step}, cell {cell}" + ("" if path is None else f", path {path}")
        super().__init__(f"non-finite value at {where}; reduce dt")
        self.step, self.cell, self.path = step, cell, path


@dataclass(frozen=True)
class StepConfig:
    dt: float = 1e-3
    record_every: int = 10
    scheme: str = "exponential_euler"
    positivity: str = "clip"

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError(f"record_every must be an integer >= 1, got {self.record_every!r}")
        if self.scheme != "exponential_euler":
            raise ValueError(f"unsupported scheme {self.scheme!r}")
        if self.positivity != "clip":
            raise ValueError(f"unsupported positivity rule {self.positivity!r}")


def n_steps_for(horizon: float, dt: float) -> int:
    # tolerate T/dt landing a hair above an integer
    return max(1, math.ceil(horizon / dt - 1e-9))


class ExponentialEuler:
    """Precomputed propagator for fixed grid, parameters, noise and ``dt``."""

    def __init__(self, grid: Grid, params: ModelParams, noise: NoiseSpec, dt: float):
        validate_params(params, grid)
        self.grid, self.params, self.noise, self.dt = grid, params, noise, float(dt)
        self.semigroups = (DiscreteSemigroup(grid, params.k1), DiscreteSemigroup(grid, params.k2))
        self.factors = np.stack([sg.decay_factors(self.dt) for sg in self.semigroups])
        self.lam = np.asarray(params.lam, dtype=float)
        self.mu1 = np.asarray(params.mu1, dtype=float)
        self.mu2 = np.asarray(params.mu2, dtype=float)
        self.alpha = np.asarray(params.alpha, dtype=float)
        self.noise_maps = []
        for species in (1, 2):
            m = increment_map(noise, species, grid)
            self.noise_maps.append(None if not np.any(m) else m)

    def increments(self, rng: RngStream, step: int, paths=0, dt: float | None = None):
        """Noise increments ``(dW1, dW2)``; ``None`` for a noiseless class."""
        return tuple(self.increments_from_normals(
            [None if self.noise_maps[k] is None
             else rng.normals(step, k + 1, self.noise.n_modes(k + 1), paths) for k in range(2)],
            dt))

    def increments_from_normals(self, normals, dt: float | None = None):
        scale = math.sqrt(self.dt if dt is None else dt)
        out = []
        for m, xi in zip(self.noise_maps, normals):
            if m is None or xi is None:
                out.append(None)
            elif self.noise.is_space_independent:
                out.append(scale * m[0, 0] * xi[..., :1])
            else:
                out.append(scale * (xi @ m))
        return out

    def advance(self, s: np.ndarray, i: np.ndarray, dw1=None, dw2=None):
        """One step from nonnegative ``(s, i)``.

        Returns ``(s_new, i_new, clipped)`` where ``clipped`` counts cells per
        path that went negative by more than transform round-off.
        """
        z = np.empty(s.shape[:-1] + (2, s.shape[-1]))
        s2 = np.ascontiguousarray(s).reshape(-1, s.shape[-1])
        i2 = np.ascontiguousarray(i).reshape(-1, s.shape[-1])
        _kernels.pre_semigroup(
            s2, i2, self.lam, self.mu1, self.mu2, self.alpha, self.dt,
            self._as_2d(dw1, s2), self._as_2d(dw2, s2), dw1 is not None, dw2 is not None,
            z.reshape(-1, 2, s.shape[-1]))
        sg = self.semigroups[0]
        c = sg.to_modes(z)
        c *= self.factors
        out = sg.from_modes(c)
        clipped = np.zeros(s2.shape[0], dtype=np.int64)
        _kernels.clip_negative(out.reshape(-1, 2, s.shape[-1]), z.reshape(-1, 2, s.shape[-1]),
                               ROUNDOFF_CLAMP, clipped)
        return out[..., 0, :], out[..., 1, :], clipped.reshape(s.shape[:-1])

    @staticmethod
    def _as_2d(dw, like):
        if dw is None:
            return np.zeros((1, 1))
        return np.ascontiguousarray(np.broadcast_to(dw, like.shape[:-1] + dw.shape[-1:])).reshape(
            like.shape[0], -1)

    def check_finite(self, s, i, step: int):
        with np.errstate(over="ignore", invalid="ignore"):
            if np.isfinite(s.sum()) and np.isfinite(i.sum()):
                return
        bad = ~(np.isfinite(s) & np.isfinite(i))
        idx = np.argwhere(bad)[0]
        path = int(idx[0]) if bad.ndim > 1 else None
        raise NumericalFailure(step, int(idx[-1]), path)


def step(state: SystemState, params: ModelParams, spec: NoiseSpec, cfg: StepConfig,
         grid: Grid, rng: RngStream, step_index: int = 0, paths=0) -> SystemState:
    """Advance ``state`` by ``cfg.dt`` using normals at ``step_index``."""
    if np.any(state.s < 0) or np.any(state.i < 0):
        raise ValueError("step needs a nonnegative state")
    prop = ExponentialEuler(grid, params, spec, cfg.dt)
    dw1, dw2 = prop.increments(rng, step_index, paths)
    s, i, _ = prop.advance(state.s, state.i, dw1, dw2)
    prop.check_finite(s, i, step_index)
    return SystemState(s, i, state.t + cfg.dt)


@dataclass
class Trajectory:
    """Observables recorded along one path or a batch of paths.

    Observable arrays have shape ``(len(times),)`` for a single path and
    ``(paths, len(times))`` for a batch.  ``clipped`` is the number of
    cell-steps clipped per path, ``cell_steps`` the number taken.
    """

    times: np.ndarray
    observables: dict[str, np.ndarray]
    clipped: np.ndarray
    cell_steps: int
    snapshots: dict[float, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def __getattr__(self, name):
        obs = self.__dict__.get("observables", {})
        if name in obs:
            return obs[name]
        raise AttributeError(name)

    @property
    def clip_fraction(self):
        return self.clipped / self.cell_steps


def simulate_paths(init: SystemState, params: ModelParams, spec: NoiseSpec, cfg: StepConfig,
                   horizon: float, grid: Grid, seed: int, paths, p: float = 0.5,
                   snapshot_times=()) -> Trajectory:
    """Integrate the paths with indices ``paths`` from ``init`` up to ``horizon``.

    Path ``k`` draws its noise from coordinates ``(seed, k, species, mode,
    step)`` only, so results do not depend on which other paths share the
    batch.
    """
    if horizon < cfg.dt * (1 - 1e-9):
        raise ValueError(f"horizon {horizon!r} is shorter than dt {cfg.dt!r}")
    if np.any(init.s < 0) or np.any(init.i < 0):
        raise ValueError("initial state must be nonnegative")
    paths = np.atleast_1d(np.asarray(paths, dtype=np.int64))
    if paths.ndim != 1:
        raise ValueError("paths must be a 1-D array of path indices")
    prop = ExponentialEuler(grid, params, spec, cfg.dt)
    rng = RngStream(seed)
    n_steps = n_steps_for(horizon, cfg.dt)
    record = set(range(0, n_steps + 1, cfg.record_every)) | {n_steps}
    record_steps = sorted(record)
    snap_steps = {min(n_steps, max(0, round(t / cfg.dt))): t for t in snapshot_times}

    s = np.broadcast_to(init.s, (len(paths), grid.n)).copy()
    i = np.broadcast_to(init.i, (len(paths), grid.n)).copy()
    recorded = {name: [] for name in sample_observables(s, i, grid, p)}
    snapshots = {}
    clipped = np.zeros(len(paths), dtype=np.int64)

    def keep(k):
        if k in record:
            for name, v in sample_observables(s, i, grid, p).items():
                recorded[name].append(v)
        if k in snap_steps:
            snapshots[snap_steps[k]] = (s.copy(), i.copy())

    keep(0)
    for k in range(n_steps):
        dw1, dw2 = prop.increments(rng, k, paths)
        s, i, c = prop.advance(s, i, dw1, dw2)
        clipped += c
        prop.check_finite(s, i, k)
        keep(k + 1)

    times = np.array(record_steps, dtype=float) * cfg.dt
    obs = {name: np.stack(v, axis=-1) for name, v in recorded.items()}
    return Trajectory(times, obs, clipped, n_steps * 2 * grid.n, snapshots)


def simulate_path(init: SystemState, params: ModelParams, spec: NoiseSpec, cfg: StepConfig,
                  horizon: float, grid: Grid, seed: int, path: int = 0, p: float = 0.5,
                  snapshot_times=()) -> Trajectory:
    """Single-path version of :func:`simulate_paths` with unbatched arrays."""
    traj = simulate_paths(init, params, spec, cfg, horizon, grid, seed, [path], p, snapshot_times)
    traj.observables = {name: v[0] for name, v in traj.observables.items()}
    traj.clipped = traj.clipped[0]
    traj.snapshots = {t: (s[0], i[0]) for t, (s, i) in traj.snapshots.items()}
    return traj


@dataclass(frozen=True)
class ConvergenceStudy:
    order: float
    dts: tuple[float, ...]
    # RMS terminal difference between levels l and l+1, keyed by the coarser dt
    differences: tuple[float, ...]


def self_convergence(init: SystemState, params: ModelParams, spec: NoiseSpec, horizon: float,
                     dt_levels, n_paths: int, grid: Grid, seed: int = 0) -> ConvergenceStudy:
    """Strong order from coupled paths at successively halved step sizes.

    Every level is driven by the same fine-level normals: a coarse increment
    is the sum of the fine increments it spans.  The order is the
    least-squares slope of ``log2`` of the RMS L2 difference between
    successive levels' terminal states against ``log2(dt)``.
    """
    dts = [float(d) for d in dt_levels]
    if len(dts) < 3:
        raise ValueError("self_convergence needs at least 3 dt levels")
    for coarse, fine in zip(dts, dts[1:]):
        if not math.isclose(coarse, 2 * fine, rel_tol=1e-9):
            raise ValueError(f"dt levels must halve successively; got {coarse!r} then {fine!r}")
    dt_min = dts[-1]
    n_fine = round(horizon / dt_min)
    if not math.isclose(n_fine * dt_min, horizon, rel_tol=1e-9):
        raise ValueError("horizon must be a whole number of finest steps")
    ratios = [round(d / dt_min) for d in dts]
    paths = np.arange(n_paths)
    rng = RngStream(seed)
    props = [ExponentialEuler(grid, params, spec, d) for d in dts]
    states = [(np.broadcast_to(init.s, (n_paths, grid.n)).copy(),
               np.broadcast_to(init.i, (n_paths, grid.n)).copy()) for _ in dts]
    sums = [[None, None] for _ in dts]
    fine = props[-1]

    for k in range(n_fine):
        xi = [None if fine.noise_maps[j] is None
              else rng.normals(k, j + 1, spec.n_modes(j + 1), paths) for j in range(2)]
        for lvl, (prop, r) in enumerate(zip(props, ratios)):
            acc = sums[lvl]
            for j in range(2):
                if xi[j] is not None:
                    acc[j] = xi[j].copy() if acc[j] is None else acc[j] + xi[j]
            if (k + 1) % r:
                continue
            # sum of r unit normals scaled back to unit variance
            normals = [None if a is None else a / math.sqrt(r) for a in acc]
            dw1, dw2 = prop.increments_from_normals(normals)
            s, i = states[lvl]
            s, i, _ = prop.advance(s, i, dw1, dw2)
            prop.check_finite(s, i, (k + 1) // r - 1)
            states[lvl] = (s, i)
            sums[lvl] = [None, None]

    diffs = []
    for (s_a, i_a), (s_b, i_b) in zip(states, states[1:]):
        sq = grid.h * np.sum((s_a - s_b) ** 2 + (i_a - i_b) ** 2, axis=-1)
        diffs.append(math.sqrt(float(np.mean(sq))))
    if min(diffs) <= 0:
        raise ValueError("levels agree exactly; convergence slope is undefined")
    slope = np.polyfit(np.log2(dts[:-1]), np.log2(diffs), 1)[0]
    return ConvergenceStudy(float(slope), tuple(dts), tuple(diffs))
