"""Quick invariant checks on a configuration, run by ``epispde verify``."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .ensemble import run_ensemble
from .noise import RngStream, covariance, increment_map, sample_increment_at
from .observables import mass_bound_reference
from .spatial import DiscreteSemigroup, integrate, laplacian_apply
from .stepper import self_convergence


@dataclass(frozen=True)
class Check:
    name: str
    status: str  # PASS, FAIL or SKIP
    detail: str

    @property
    def passed(self) -> bool:
        return self.status != "FAIL"


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def check_structure(config) -> list[Check]:
    grid = config.grid
    sg = DiscreteSemigroup(grid, config.params.k2)
    u = np.random.default_rng(config.seed).random(grid.n)
    lhs = sg.apply(sg.apply(u, 0.3), 0.7)
    rhs = sg.apply(u, 1.0)
    law = float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))
    mass = abs(float(integrate(laplacian_apply(u, sg), grid)))
    return [
        Check("semigroup law", _status(law <= 1e-10), f"relative deviation {law:.2e}"),
        Check("laplacian mass conservation", _status(mass <= 1e-12 * np.max(np.abs(u))),
              f"|integral| = {mass:.2e}"),
    ]


def check_positivity_and_mass(config, n_paths: int = 32, horizon: float = 2.0) -> list[Check]:
    cfg = replace(config, horizon=min(config.horizon, horizon))
    stats = run_ensemble(cfg, n_paths=min(n_paths, config.n_paths), workers=1)
    lowest = min(float(np.min(stats.min[k])) for k in ("mass_s", "mass_i"))
    out = [Check("positivity", _status(lowest >= 0),
                 f"min recorded mass {lowest:.3g}, clip fraction {stats.clip_fraction:.2e}")]
    mu_star = float(np.min(np.minimum(cfg.params.mu1, cfg.params.mu2)))
    if mu_star <= 0:
        out.append(Check("mass bound", "SKIP", "needs mu_* > 0"))
        return out
    init_mass = float(integrate(cfg.s0 + cfg.i0, cfg.grid))
    bound = mass_bound_reference(cfg.params, init_mass, stats.times)
    se = np.nan_to_num(stats.stderr("mass_total"))
    excess = float(np.max(stats.mean["mass_total"] - bound - 3 * se))
    out.append(Check("mass bound", _status(excess <= 0), f"max excess over bound {excess:.3g}"))
    return out


def check_noise_covariance(config, draws: int = 100_000) -> list[Check]:
    out = []
    points = [(0.25, 0.25), (0.25, 0.75), (0.5, 0.5)]
    rng = RngStream(config.seed)
    for species in (1, 2):
        noise = config.noise
        if not np.any(increment_map(noise, species, config.grid)):
            out.append(Check(f"noise covariance species {species}", "SKIP", "no noise"))
            continue
        dt = 1e-2
        w = sample_increment_at(noise, species, dt, [0.25, 0.5, 0.75], rng, 0, np.arange(draws))
        col = {0.25: 0, 0.5: 1, 0.75: 2}
        worst = 0.0
        for x, y in points:
            prod = w[:, col[x]] * w[:, col[y]] / dt
            se = prod.std(ddof=1) / np.sqrt(draws)
            worst = max(worst, abs(prod.mean() - covariance(noise, x, y, 1.0, species)) / se)
        out.append(Check(f"noise covariance species {species}", _status(worst <= 3.0),
                         f"worst deviation {worst:.2f} standard errors"))
    return out


def check_convergence(config, n_paths: int = 16, horizon: float = 0.5) -> Check:
    dts = [4e-3, 2e-3, 1e-3, 5e-4]
    study = self_convergence(config.initial_state(), config.params, config.noise, horizon,
                             dts, n_paths, config.grid, config.seed)
    return Check("strong convergence order", _status(study.order >= 0.4),
                 f"fitted order {study.order:.3f}")


def run_verify_suite(config) -> list[Check]:
    checks = check_structure(config)
    checks += check_positivity_and_mass(config)
    checks += check_noise_covariance(config)
    checks.append(check_convergence(config))
    return checks
