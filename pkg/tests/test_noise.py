import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from epispde import CoefficientFamily, Grid, NoiseSpec, RngStream, covariance, eigenbasis_eval, sample_increment
from epispde.noise import increment_map, philox4x32


class TestPhilox:
    # known-answer vectors published with the Random123 library
    @pytest.mark.parametrize("counter, key, want", [
        ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
        ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
        ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
         (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
    ])
    def test_known_answers(self, counter, key, want):
        assert tuple(int(w) for w in philox4x32(counter, key)) == want

    def test_kernel_matches_reference(self):
        rng = RngStream(2**40 + 17)
        paths = np.arange(5, 45)
        # the two routes may differ by an ulp in cos/sin but draw identical bits
        for n_modes in (1, 2, 7, 20):
            np.testing.assert_allclose(rng.normals(3, 2, n_modes, paths),
                                       rng.normals_reference(3, 2, n_modes, paths),
                                       rtol=1e-14, atol=1e-15)

    def test_coordinates_are_independent_of_batch(self):
        rng = RngStream(7)
        batch = rng.normals(11, 1, 6, np.arange(10))
        np.testing.assert_array_equal(batch[4], rng.normals(11, 1, 6, 4))

    def test_mode_prefix_is_stable(self):
        rng = RngStream(7)
        np.testing.assert_array_equal(rng.normals(0, 1, 20, 3)[:5], rng.normals(0, 1, 5, 3))

    def test_streams_differ(self):
        rng = RngStream(0)
        a = rng.normals(0, 1, 8, 0)
        for other in (rng.normals(1, 1, 8, 0), rng.normals(0, 2, 8, 0), rng.normals(0, 1, 8, 1),
                      RngStream(1).normals(0, 1, 8, 0)):
            assert not np.array_equal(a, other)

    def test_normality(self):
        z = RngStream(99).normals(0, 1, 50, np.arange(4000)).ravel()
        assert stats.kstest(z, "norm").pvalue > 1e-3
        assert abs(z.mean()) < 4 / np.sqrt(z.size)
        assert abs(z.var() - 1) < 5 * np.sqrt(2 / z.size)

    def test_seed_range(self):
        with pytest.raises(ValueError):
            RngStream(-1)


class TestCoefficientFamily:
    def test_geometric_trace(self):
        assert CoefficientFamily.geometric(0.1, 0.5).trace() == pytest.approx(0.2, rel=1e-15)

    def test_polynomial_trace(self):
        assert CoefficientFamily.polynomial(0.1, 2.0).trace() == pytest.approx(0.1 * np.pi**2 / 6, rel=1e-14)

    @pytest.mark.parametrize("fam", [CoefficientFamily.geometric(0.3, 0.7),
                                     CoefficientFamily.polynomial(0.2, 2.5)])
    @pytest.mark.parametrize("K", [1, 10, 100])
    def test_tail_plus_head_is_trace(self, fam, K):
        assert fam.coefficients(K).sum() + fam.tail(K) == pytest.approx(fam.trace(), rel=1e-12)

    @pytest.mark.parametrize("kind, rate", [("geometric", 1.0), ("geometric", 1.5), ("polynomial", 1.0),
                                            ("polynomial", 0.5)])
    def test_divergent_families_rejected(self, kind, rate):
        with pytest.raises(ValueError, match="outside convergence region"):
            CoefficientFamily(kind, 0.1, rate)


class TestNoiseSpec:
    def test_space_independent_trace(self):
        spec = NoiseSpec.space_independent(0.1, 0.3)
        assert spec.trace(2) == pytest.approx((0.09, 0.0))
        assert spec.is_space_independent

    def test_truncation_tail_enforced(self):
        with pytest.raises(ValueError, match="raise K"):
            NoiseSpec.kl(CoefficientFamily.geometric(0.1, 0.5), K=10)

    def test_tail_tolerance_met(self):
        spec = NoiseSpec.kl(CoefficientFamily.polynomial(0.1, 3.0), K=800)
        a, tail = spec.trace(1)
        assert tail <= spec.tail_tol * a

    def test_zero_noise_field(self):
        grid = Grid(8)
        spec = NoiseSpec.kl(CoefficientFamily.geometric(0.0, 0.5), K=3)
        np.testing.assert_array_equal(sample_increment(spec, 1, 0.1, grid, RngStream(0)), 0.0)


class TestBasis:
    @pytest.mark.parametrize("k, x, want", [(0, 0.37, 1.0), (1, 0.0, np.sqrt(2)), (2, 0.25, 0.0)])
    def test_values(self, k, x, want):
        assert eigenbasis_eval(k, x) == pytest.approx(want, abs=1e-15)

    def test_orthonormal_on_grid(self):
        # the cell-centred samples of the cosine basis are exactly orthonormal
        grid = Grid(32)
        e = eigenbasis_eval(np.arange(10)[:, None], grid.centers)
        np.testing.assert_allclose(grid.h * e @ e.T, np.eye(10), atol=1e-13)

    @given(st.integers(0, 500), st.floats(0, 1))
    def test_uniform_bound(self, k, x):
        assert abs(eigenbasis_eval(k, x)) <= np.sqrt(2) + 1e-15


class TestIncrements:
    def test_space_independent_single_mode(self):
        grid = Grid(6)
        spec = NoiseSpec.space_independent(1.0, 1.0)
        rng = RngStream(5)
        zeta = rng.normals(0, 1, 1, 0)[0]
        np.testing.assert_array_equal(sample_increment(spec, 1, 1.0, grid, rng), np.full(6, zeta))

    def test_increment_map_shape(self):
        spec = NoiseSpec.kl(CoefficientFamily.geometric(0.1, 0.5), K=20)
        assert increment_map(spec, 2, Grid(16)).shape == (20, 16)

    def test_variance_at_midpoint(self):
        # oracle: closed-form covariance sum evaluated at x = y = 0.5
        spec = NoiseSpec.kl(CoefficientFamily.geometric(0.1, 0.5), K=20)
        dt = 0.01
        xi = RngStream(3).normals(0, 2, 20, np.arange(100_000))
        coef = spec.coefficients(2)
        w = np.sqrt(dt) * xi @ (np.sqrt(coef) * eigenbasis_eval(np.arange(20), 0.5))
        se = np.std(w**2, ddof=1) / np.sqrt(len(w))
        assert abs(np.mean(w**2) - covariance(spec, 0.5, 0.5, dt)) < 3 * se

    def test_grid_increment_variance(self):
        grid = Grid(16)
        spec = NoiseSpec.kl(CoefficientFamily.geometric(0.1, 0.5), K=20)
        w = sample_increment(spec, 1, 0.01, grid, RngStream(8), 0, np.arange(50_000))
        var = w.var(axis=0)
        want = covariance(spec, grid.centers, grid.centers, 0.01, species=1)
        np.testing.assert_allclose(var, want, rtol=0.05)

    def test_sample_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            sample_increment(NoiseSpec.zero(), 1, 0.0, Grid(4), RngStream(0))


class TestCovariance:
    def test_zero_time(self):
        spec = NoiseSpec.kl(CoefficientFamily.geometric(0.1, 0.5), K=20)
        assert covariance(spec, 0.3, 0.6, 0.0) == 0.0

    def test_space_independent(self):
        assert covariance(NoiseSpec.space_independent(0.2, 0.2), 0.1, 0.9, 2.0) == pytest.approx(0.08)

    @pytest.mark.parametrize("x, y", [(0.0, 0.0), (0.25, 0.75), (0.1, 0.4)])
    def test_truncated_close_to_untruncated(self, x, y):
        # oracle: direct sum with a million modes
        spec = NoiseSpec.kl(CoefficientFamily.geometric(0.1, 0.5), K=20)
        k = np.arange(10**6)
        full = np.sum(0.1 * 0.5**k * eigenbasis_eval(k, x) * eigenbasis_eval(k, y))
        assert covariance(spec, x, y, 1.0) == pytest.approx(full, abs=2 * spec.trace(2)[1] + 1e-15)

    @given(st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=30)
    def test_symmetric_and_bounded(self, x, y):
        spec = NoiseSpec.kl(CoefficientFamily.polynomial(0.1, 3.0), K=800)
        c = covariance(spec, x, y, 1.0)
        assert c == pytest.approx(covariance(spec, y, x, 1.0), abs=1e-15)
        assert abs(c) <= 2 * spec.trace(2)[0] + 1e-12


class TestPointIncrements:
    def test_agrees_with_grid_increments(self):
        grid = Grid(2)  # centres 0.25 and 0.75
        spec = NoiseSpec.kl(CoefficientFamily.geometric(0.1, 0.5), K=20)
        rng = RngStream(12)
        from epispde import sample_increment_at
        np.testing.assert_allclose(sample_increment_at(spec, 1, 0.01, [0.25, 0.75], rng, 4, np.arange(6)),
                                   sample_increment(spec, 1, 0.01, grid, rng, 4, np.arange(6)), rtol=1e-14)
