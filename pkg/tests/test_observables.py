import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from epispde import Grid, ModelParams, fit_decay_rate, mass_bound_reference, permanence_functional, time_average
from epispde.observables import UnderflowError, sample_observables


class TestPermanence:
    @pytest.mark.parametrize("level, want", [(0.0, 0.0), (1.0, 1.0), (0.5, 0.5), (3.0, 1.0)])
    def test_constant_fields(self, level, want):
        grid = Grid(10)
        assert permanence_functional(np.full(10, level), grid) == pytest.approx(want, abs=1e-15)

    def test_observables_consistent(self, rng):
        grid = Grid(12)
        s, i = rng.random((3, 12)), 2 * rng.random((3, 12))
        obs = sample_observables(s, i, grid, p=0.5)
        np.testing.assert_allclose(obs["perm"] ** 2, obs["perm_sq"], rtol=1e-14)
        np.testing.assert_allclose(obs["mass_total"], obs["mass_s"] + obs["mass_i"])
        np.testing.assert_allclose(obs["mass_i_pow_p"], np.sqrt(obs["mass_i"]))
        assert obs["perm"].shape == (3,)


class TestTimeAverage:
    def test_constant(self):
        assert time_average(np.full(5, 2.5), np.linspace(0, 3, 5)) == pytest.approx(2.5)

    def test_two_points(self):
        assert time_average([0.0, 1.0], [0.0, 1.0]) == 0.5

    def test_linear_ramp_exact(self):
        t = np.linspace(0, 1, 11)
        assert time_average(t, t) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("values, times", [([1.0], [0.0]), ([1.0, 2.0], [1.0, 1.0]), ([1, 2, 3], [0, 1])])
    def test_bad_input(self, values, times):
        with pytest.raises(ValueError):
            time_average(values, times)


class TestMassBound:
    def test_equilibrium(self):
        grid = Grid(4)
        p = ModelParams.constant(grid, 1.0, 1.0, 1.0, 0.0)
        assert mass_bound_reference(p, 5.0, 1e3) == pytest.approx(1.0)

    def test_initial_time(self):
        grid = Grid(4)
        p = ModelParams.constant(grid, 1.0, 0.5, 2.0, 0.0)
        assert mass_bound_reference(p, 5.0, 0.0) == pytest.approx(7.0)

    def test_arithmetic(self):
        grid = Grid(4)
        p = ModelParams.constant(grid, 2.0, 0.5, 0.5, 0.0)
        assert mass_bound_reference(p, 0.0, math.log(2) / 0.5) == pytest.approx(4.0)

    def test_requires_positive_mortality(self):
        grid = Grid(4)
        with pytest.raises(ValueError, match="bound requires mu_\\* > 0"):
            mass_bound_reference(ModelParams.constant(grid, 1.0, 0.0, 1.0, 0.0), 1.0, 0.0)


class TestDecayFit:
    def test_exact_exponential(self):
        t = np.linspace(1, 5, 41)
        fit = fit_decay_rate(t, np.exp(-0.3 * t), (1, 5))
        assert abs(fit.slope + 0.3) <= 1e-12
        assert fit.n_samples == 41

    @given(st.floats(-3, 3), st.floats(-5, 5))
    def test_recovers_any_rate(self, rate, log_c):
        t = np.linspace(0, 4, 50)
        fit = fit_decay_rate(t, np.exp(log_c + rate * t), (0, 4))
        assert fit.slope == pytest.approx(rate, abs=1e-10)
        assert fit.intercept == pytest.approx(log_c, abs=1e-9)

    def test_constant(self):
        t = np.linspace(0, 1, 20)
        assert fit_decay_rate(t, np.full(20, 3.0), (0, 1)).slope == pytest.approx(0.0, abs=1e-14)

    def test_window_selects_samples(self):
        t = np.linspace(0, 10, 101)
        m = np.where(t < 5, np.exp(-t), np.exp(-5 - 2 * (t - 5)))
        assert fit_decay_rate(t, m, (5, 10)).slope == pytest.approx(-2.0, abs=1e-12)

    def test_underflow_reports_last_valid_time(self):
        t = np.linspace(0, 2, 21)
        m = np.exp(-t)
        m[15:] = 0.0
        with pytest.raises(UnderflowError, match="underflow before window end") as info:
            fit_decay_rate(t, m, (0, 2))
        assert info.value.last_valid_time == pytest.approx(1.4)

    def test_too_few_samples(self):
        t = np.linspace(0, 1, 5)
        with pytest.raises(ValueError, match="at least 10"):
            fit_decay_rate(t, np.exp(-t), (0, 1))

    def test_replicates_add_monte_carlo_error(self):
        t = np.linspace(0, 4, 41)
        reps = np.exp(np.array([-0.9, -1.0, -1.1])[:, None] * t)
        fit = fit_decay_rate(t, np.exp(-t), (0, 4), replicate_means=reps)
        assert fit.ols_stderr == pytest.approx(0.0, abs=1e-12)
        # delete-one jackknife: sqrt((g-1)/g * sum (s_k - mean)^2)
        assert fit.mc_stderr == pytest.approx(math.sqrt(2 / 3 * 0.02), rel=1e-10)
        assert fit.stderr == pytest.approx(fit.mc_stderr, rel=1e-10)
