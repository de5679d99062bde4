import numpy as np
import pytest

from epispde import Grid, ModelParams, NoiseSpec, StepConfig


@pytest.fixture
def grid():
    return Grid(16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def extinct_params(grid):
    return ModelParams.constant(grid, lam=1.0, mu1=0.5, mu2=0.4, alpha=0.3)


@pytest.fixture
def si_noise():
    return NoiseSpec.space_independent(0.2, 0.2)


@pytest.fixture
def step_cfg():
    return StepConfig(dt=1e-3, record_every=10)


def make_config(n=16, horizon=1.0, dt=1e-2, record_every=5, lam=1.0, mu1=0.5, mu2=0.2, alpha=0.8,
                noise=None, s0=1.0, i0=0.5, seed=0, n_paths=20, **analysis):
    from epispde import AnalysisConfig, RunConfig, constant_field

    grid = Grid(n)
    return RunConfig(
        grid=grid,
        step=StepConfig(dt=dt, record_every=record_every),
        horizon=horizon,
        params=ModelParams.constant(grid, lam, mu1, mu2, alpha),
        noise=NoiseSpec.space_independent(0.2, 0.3) if noise is None else noise,
        s0=constant_field(grid, s0),
        i0=constant_field(grid, i0),
        seed=seed,
        n_paths=n_paths,
        analysis=AnalysisConfig(**analysis),
    )


# criterion number -> (status, detail), filled by test_acceptance
ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE[number] = (status, detail)
    print(f"criterion {number}: {status} {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")
