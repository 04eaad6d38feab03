import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from smheat import catalog
from smheat.errors import ConfigError
from smheat.regularity import SampledFunction, holder_exponent
from smheat.sm import (SmKind, SmSpec, dyadic_increments, dyadic_sum, fgn_circulant, measure,
                       sample_path, symmetric_stable)

WIENER = SmSpec.create("wiener")


def linear_path(levels=3, horizon=1.0):
    return sample_path(SmSpec.create("deterministic_linear"), horizon, levels, 0)


class TestSpec:
    def test_defaults(self, fbm_weight):
        assert WIENER.claimed_beta_mu == 0.5
        assert SmSpec.create("weighted_fbm", hurst=0.7, weight=fbm_weight).claimed_beta_mu == 0.7
        assert SmSpec.create("alpha_stable", alpha=1.5).claimed_beta_mu is None
        assert SmSpec.create("compensated_poisson", intensity=2.0, jump_mean=1.0).claimed_beta_mu is None

    def test_jump_kinds_cannot_claim_holder(self):
        with pytest.raises(ConfigError):
            SmSpec(SmKind.ALPHA_STABLE, alpha=1.2, claimed_beta_mu=0.3)

    @pytest.mark.parametrize("kw", [
        dict(kind=SmKind.WEIGHTED_FBM, hurst=0.4),
        dict(kind=SmKind.WEIGHTED_FBM, hurst=1.0),
        dict(kind=SmKind.WIENER, hurst=0.7),
        dict(kind=SmKind.ALPHA_STABLE, alpha=2.0),
        dict(kind=SmKind.ALPHA_STABLE, alpha=1.5, scale=0.0),
        dict(kind=SmKind.COMPENSATED_POISSON, intensity=-1.0, jump_mean=1.0),
        dict(kind=SmKind.WIENER, alpha=1.5),
    ])
    def test_invalid(self, kw, fbm_weight):
        if kw["kind"] is SmKind.WEIGHTED_FBM:
            kw["weight"] = fbm_weight
        with pytest.raises(ConfigError):
            SmSpec(**kw)

    def test_fbm_needs_weight(self):
        with pytest.raises(ConfigError):
            SmSpec(SmKind.WEIGHTED_FBM, hurst=0.7)

    def test_parse_aliases(self):
        assert SmKind.parse("fBm") is SmKind.WEIGHTED_FBM
        with pytest.raises(ConfigError):
            SmKind.parse("levy_flight")


class TestSamplePath:
    def test_zero(self):
        p = sample_path(SmSpec.create("zero"), 1.0, 4, 0)
        np.testing.assert_array_equal(p.cumulative, np.zeros(17))

    def test_linear_identity(self):
        p = linear_path()
        np.testing.assert_array_equal(p.cumulative, np.arange(9) / 8)

    @pytest.mark.parametrize("levels", [0, 25])
    def test_levels_range(self, levels):
        with pytest.raises(ValueError):
            sample_path(WIENER, 1.0, levels, 0)

    def test_fbm_level_cap(self, fbm_weight):
        spec = SmSpec.create("weighted_fbm", hurst=0.7, weight=fbm_weight)
        with pytest.raises(ValueError):
            sample_path(spec, 1.0, 15, 0)

    def test_bad_horizon(self):
        with pytest.raises(ValueError):
            sample_path(WIENER, 0.0, 4, 0)

    @pytest.mark.parametrize("kind,kw", [("wiener", {}), ("alpha_stable", {"alpha": 1.3}),
                                         ("compensated_poisson", {"intensity": 5.0, "jump_mean": 0.5})])
    def test_reproducible_and_frozen(self, kind, kw):
        spec = SmSpec.create(kind, **kw)
        p1, p2 = sample_path(spec, 2.0, 10, 42), sample_path(spec, 2.0, 10, 42)
        np.testing.assert_array_equal(p1.cumulative, p2.cumulative)
        assert p1.cumulative[0] == 0.0
        assert not p1.cumulative.flags.writeable
        assert not np.array_equal(p1.cumulative, sample_path(spec, 2.0, 10, 43).cumulative)

    def test_fbm_reproducible(self, fbm_weight):
        spec = SmSpec.create("weighted_fbm", hurst=0.7, weight=fbm_weight)
        np.testing.assert_array_equal(sample_path(spec, 1.0, 8, 5).cumulative,
                                      sample_path(spec, 1.0, 8, 5).cumulative)

    def test_wiener_increment_variance(self):
        target = 2.0 ** -12
        for seed in range(100):
            inc = sample_path(WIENER, 1.0, 12, seed).increments()
            assert abs(inc.var() / target - 1) < 0.10

    def test_wiener_holder_above_claim(self):
        ests = [holder_exponent(SampledFunction(sample_path(WIENER, 1.0, 12, s).cumulative, 0, 1), 1, 16).exponent
                for s in range(100)]
        assert np.median(ests) > WIENER.claimed_beta_mu - 0.1

    def test_fbm_holder_above_claim(self, fbm_weight):
        spec = SmSpec.create("weighted_fbm", hurst=0.75, weight=fbm_weight)
        ests = [holder_exponent(SampledFunction(sample_path(spec, 1.0, 12, s).cumulative, 0, 1), 1, 16).exponent
                for s in range(100)]
        assert np.median(ests) > spec.claimed_beta_mu - 0.1

    def test_compensated_poisson_structure(self):
        spec = SmSpec.create("compensated_poisson", intensity=8.0, jump_mean=0.5)
        p = sample_path(spec, 1.0, 8, 3)
        drift = 8.0 / 256
        jumps = p.increments() / 0.5 + drift
        np.testing.assert_allclose(jumps, np.round(jumps), atol=1e-12)
        # compensation: sum of jumps minus intensity*T
        assert p.cumulative[-1] == pytest.approx(0.5 * (np.round(jumps).sum() - 8.0), abs=1e-12)


class TestFbmSampler:
    @pytest.mark.parametrize("hurst", [0.6, 0.8])
    def test_covariance_matches_fbm(self, hurst):
        # Monte Carlo check of Cov(W(t_i), W(t_j)) against the exact fBm covariance
        n, reps = 16, 6000
        rng = np.random.Generator(np.random.PCG64(7))
        paths = np.cumsum(np.array([fgn_circulant(hurst, n, rng) for _ in range(reps)]), axis=1)
        t = np.arange(1, n + 1, dtype=float)
        exact = 0.5 * (t[:, None] ** (2 * hurst) + t[None, :] ** (2 * hurst)
                       - np.abs(t[:, None] - t[None, :]) ** (2 * hurst))
        emp = paths.T @ paths / reps
        rel = np.abs(emp - exact) / np.sqrt(np.outer(np.diag(exact), np.diag(exact)))
        assert rel.max() < 0.08

    def test_terminal_variance_scaling(self, fbm_weight):
        hurst = 0.7
        spec = SmSpec.create("weighted_fbm", hurst=hurst, weight=fbm_weight)
        ends = np.array([sample_path(spec, 2.0, 6, s).cumulative[-1] for s in range(3000)])
        expected = 2.0 ** (2 * hurst)
        assert ends.var() == pytest.approx(expected, rel=0.08)

    def test_weight_multiplies_increments(self):
        w1 = catalog.make("weight", "constant", (1.0,))
        w3 = catalog.make("weight", "constant", (3.0,))
        p1 = sample_path(SmSpec.create("weighted_fbm", hurst=0.7, weight=w1), 1.0, 8, 11)
        p3 = sample_path(SmSpec.create("weighted_fbm", hurst=0.7, weight=w3), 1.0, 8, 11)
        np.testing.assert_allclose(p3.increments(), 3 * p1.increments(), rtol=0, atol=1e-14)


class TestStableSampler:
    @pytest.mark.parametrize("alpha", [0.8, 1.0, 1.5])
    def test_matches_scipy_levy_stable(self, alpha):
        rng = np.random.Generator(np.random.PCG64(3))
        x = symmetric_stable(alpha, 1500, rng)
        dist = stats.levy_stable(alpha, 0.0)
        assert stats.kstest(x, dist.cdf).pvalue > 1e-3

    def test_increment_scaling(self):
        # stable self-similarity: increments over dt have scale dt^(1/alpha)
        spec = SmSpec.create("alpha_stable", alpha=1.5, scale=2.0)
        inc = sample_path(spec, 1.0, 10, 9).increments()
        scaled = inc / (2.0 * (2.0 ** -10) ** (1 / 1.5))
        assert stats.kstest(scaled, stats.levy_stable(1.5, 0.0).cdf).pvalue > 1e-3


class TestMeasure:
    def test_zero(self):
        p = sample_path(SmSpec.create("zero"), 1.0, 5, 0)
        assert measure(p, 0.1, 0.9) == 0.0

    def test_linear(self):
        assert measure(linear_path(), 0.25, 0.75) == 0.5

    def test_empty_interval(self):
        assert measure(linear_path(), 0.3, 0.3) == 0.0

    def test_snapping_ties_toward_zero(self):
        p = linear_path()
        # 1/16 is halfway between grid points 0 and 1/8
        assert p.snap(1 / 16) == 0
        assert p.snap(3 / 16) == 1
        assert p.snap(0.07) == 1
        assert measure(p, 1 / 16, 0.5) == 0.5

    def test_whole_interval_is_terminal_value(self):
        p = sample_path(WIENER, 1.0, 10, 1)
        assert measure(p, 0, 1) == p.cumulative[-1]
        assert measure(p, 0, 1) == pytest.approx(p.increments().sum(), abs=1e-13)

    @pytest.mark.parametrize("a,b", [(0.6, 0.2), (-0.1, 0.5), (0.2, 1.5)])
    def test_errors(self, a, b):
        with pytest.raises(ValueError):
            measure(linear_path(), a, b)

    @given(st.integers(0, 1024), st.integers(0, 1024), st.integers(0, 1024), st.integers(0, 50))
    @settings(max_examples=200, deadline=None)
    def test_additivity(self, i, j, k, seed):
        a, b, c = sorted((i, j, k))
        p = sample_path(WIENER, 1.0, 10, seed)
        h = p.step
        lhs = measure(p, a * h, c * h)
        rhs = measure(p, a * h, b * h) + measure(p, b * h, c * h)
        # exact up to one rounding of the sum
        assert abs(lhs - rhs) <= 4 * np.spacing(np.abs(p.cumulative).max())

    @given(st.integers(0, 1024), st.integers(0, 1024), st.integers(0, 1024))
    @settings(max_examples=50, deadline=None)
    def test_additivity_exact_on_dyadic_values(self, i, j, k):
        a, b, c = sorted((i, j, k))
        p = sample_path(SmSpec.create("deterministic_linear"), 1.0, 10, 0)
        h = p.step
        assert measure(p, a * h, c * h) == measure(p, a * h, b * h) + measure(p, b * h, c * h)


class TestDyadic:
    def test_zero(self):
        p = sample_path(SmSpec.create("zero"), 1.0, 6, 0)
        np.testing.assert_array_equal(dyadic_increments(p, 3, 1.0), np.zeros(8))
        np.testing.assert_array_equal(dyadic_sum(p, 0.5, 1.0, 6), np.zeros(6))

    def test_linear_increments(self):
        np.testing.assert_array_equal(dyadic_increments(linear_path(), 2, 1.0), [0.25] * 4)

    def test_sum_is_total_measure(self):
        p = sample_path(WIENER, 1.0, 12, 4)
        for n in (1, 5, 12):
            assert dyadic_increments(p, n, 1.0).sum() == pytest.approx(measure(p, 0, 1.0), abs=1e-13)
        assert dyadic_increments(p, 4, 0.5).sum() == pytest.approx(measure(p, 0, 0.5), abs=1e-13)

    def test_level_beyond_resolution(self):
        with pytest.raises(ValueError):
            dyadic_increments(linear_path(3), 4, 1.0)

    def test_linear_geometric_series(self):
        p = linear_path(12)
        sums = dyadic_sum(p, 1.0, 1.0, 12)
        expected = np.cumsum([2.0 ** (-2 * n) for n in range(1, 13)])
        np.testing.assert_allclose(sums, expected, rtol=1e-12)
        assert sums[-1] == pytest.approx(1 / 3, abs=1e-7)

    @given(st.integers(0, 10_000), st.floats(0.05, 2.0))
    @settings(max_examples=30, deadline=None)
    def test_monotone(self, seed, eps):
        sums = dyadic_sum(sample_path(WIENER, 1.0, 8, seed), eps, 1.0)
        assert np.all(np.diff(sums) >= 0)

    def test_wiener_mean_matches_quadratic_variation(self):
        eps, n_max = 0.5, 10
        sums = np.array([dyadic_sum(sample_path(WIENER, 1.0, n_max, s), eps, 1.0) for s in range(200)])
        expected = np.cumsum([2.0 ** (-n * eps) for n in range(1, n_max + 1)])
        np.testing.assert_allclose(sums.mean(axis=0), expected, rtol=0.05)
