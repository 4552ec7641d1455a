import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from farmerjoshi.stats import (
    MOMENT_NAMES,
    DegenerateSeriesWarning,
    MomentVector,
    StatisticError,
    acf,
    adf_statistic,
    garch_persistence,
    gph_estimator,
    hill_tail_average,
    hurst_exponent,
    ks_statistic,
    moment_vector,
    sample_moments,
)


def brute_force_ks(x, y):
    """Independent oracle: scan every observed point."""
    pts = np.concatenate([x, y])
    best = 0.0
    for p in pts:
        fx = np.mean(x <= p)
        fy = np.mean(y <= p)
        best = max(best, abs(fx - fy))
    return best


def adf_oracle(y, p):
    """Independent regression oracle solved via the normal equations."""
    y = np.asarray(y, dtype=float)
    dy = np.diff(y)
    dep = dy[p:]
    rows = len(dep)
    cols = [np.ones(rows), y[p:len(y) - 1]]
    for i in range(1, p + 1):
        cols.append(dy[p - i:len(dy) - i])
    X = np.column_stack(cols)
    xtx = X.T @ X
    beta = np.linalg.solve(xtx, X.T @ dep)
    resid = dep - X @ beta
    s2 = resid @ resid / (rows - X.shape[1])
    se = np.sqrt(s2 * np.linalg.inv(xtx)[1, 1])
    return beta[1] / se


class TestSampleMoments:
    def test_population_kurtosis_convention(self):
        mean, sd, kurt = sample_moments(np.array([-1.0, 1.0, -1.0, 1.0]))
        assert mean == 0.0
        assert sd == pytest.approx(np.sqrt(4.0 / 3.0))
        assert kurt == pytest.approx(-2.0)

    def test_constant_series_zero_variance(self):
        with pytest.raises(StatisticError, match="excess kurtosis"):
            sample_moments(np.full(10, 0.3))

    def test_too_short(self):
        with pytest.raises(StatisticError):
            sample_moments(np.array([1.0, 2.0, 3.0]))

    def test_normal_sample_large(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(1_000_000)
        mean, sd, kurt = sample_moments(x)
        n = len(x)
        assert abs(mean) < 5 / np.sqrt(n)
        assert abs(sd - 1) < 5 / np.sqrt(2 * n)
        assert abs(kurt) < 5 * np.sqrt(24.0 / n)

    def test_location_scale_behavior(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal(500)
        _, sd, kurt = sample_moments(x)
        _, sd_shift, kurt_shift = sample_moments(x + 7.0)
        assert sd_shift == pytest.approx(sd, rel=1e-9)
        assert kurt_shift == pytest.approx(kurt, rel=1e-6)
        _, sd_scaled, kurt_scaled = sample_moments(3.0 * x)
        assert sd_scaled == pytest.approx(3.0 * sd, rel=1e-12)
        assert kurt_scaled == pytest.approx(kurt, rel=1e-9)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(400)
        shuffled = rng.permutation(x)
        assert sample_moments(x) == pytest.approx(sample_moments(shuffled), rel=1e-10)


class TestKsStatistic:
    def test_identical_samples(self):
        x = np.array([0.3, -1.0, 2.0])
        assert ks_statistic(x, x) == 0.0

    def test_disjoint_supports(self):
        assert ks_statistic(np.array([1.0, 2.0]), np.array([5.0, 6.0])) == 1.0

    def test_interleaved_example(self):
        d = ks_statistic(np.array([1.0, 2.0, 3.0]), np.array([1.5, 2.5]))
        assert d == pytest.approx(1.0 / 3.0)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        x, y = rng.standard_normal(40), rng.standard_normal(25) + 0.3
        assert ks_statistic(x, y) == ks_statistic(y, x)

    def test_empty_rejected(self):
        with pytest.raises(StatisticError):
            ks_statistic(np.array([]), np.array([1.0]))

    @given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force(self, n, m, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(n)
        y = rng.standard_normal(m) + rng.uniform(-1, 1)
        assert ks_statistic(x, y) == pytest.approx(brute_force_ks(x, y), abs=1e-12)


class TestHurstExponent:
    def test_too_short(self):
        with pytest.raises(StatisticError):
            hurst_exponent(np.random.default_rng(0).standard_normal(100))

    def test_constant_series_fallback(self):
        with pytest.warns(DegenerateSeriesWarning):
            assert hurst_exponent(np.ones(512)) == 1.0

    def test_iid_close_to_half(self):
        vals = [hurst_exponent(np.random.default_rng(s).standard_normal(4096))
                for s in range(10)]
        assert abs(np.mean(vals) - 0.5) < 0.1

    def test_permutation_dependence(self, clustered_returns):
        x = np.cumsum(np.abs(clustered_returns.values))  # strongly persistent
        rng = np.random.default_rng(0)
        assert abs(hurst_exponent(x) - hurst_exponent(rng.permutation(x))) > 0.05


class TestGphEstimator:
    def test_constant_abs_returns_degenerate(self):
        with pytest.raises(StatisticError, match="degenerate periodogram"):
            gph_estimator(np.tile([1.0, -1.0], 200))

    def test_too_short(self):
        with pytest.raises(StatisticError):
            gph_estimator(np.random.default_rng(0).standard_normal(128))

    def test_iid_near_zero(self):
        vals = [gph_estimator(np.random.default_rng(s).standard_normal(4096))
                for s in range(10)]
        assert abs(np.mean(vals)) < 0.1

    def test_permutation_dependence(self, clustered_returns):
        x = clustered_returns.values
        shuffled = np.random.default_rng(1).permutation(x)
        assert gph_estimator(x) != pytest.approx(gph_estimator(shuffled), abs=1e-6)


class TestAdfStatistic:
    def test_matches_independent_oracle(self):
        rng = np.random.default_rng(4)
        y = rng.standard_normal(500)
        p = int(np.floor((len(y) - 1) ** (1.0 / 3.0)))
        assert adf_statistic(y) == pytest.approx(adf_oracle(y, p), abs=1e-8)

    def test_pure_alternating_series_is_singular(self):
        # dy = -2y exactly, so the design is collinear at any lag order
        with pytest.raises(StatisticError, match="singular"):
            adf_statistic(np.tile([1.0, -1.0], 100))

    def test_near_alternating_series_equals_oracle(self):
        n = 200
        rng = np.random.default_rng(31)
        y = np.tile([1.0, -1.0], n // 2) + 0.01 * rng.standard_normal(n)
        p = int(np.floor((n - 1) ** (1.0 / 3.0)))
        stat = adf_statistic(y)
        assert np.isfinite(stat)
        assert stat == pytest.approx(adf_oracle(y, p), abs=1e-8)

    def test_stationary_returns_strongly_negative(self):
        rng = np.random.default_rng(6)
        assert adf_statistic(rng.standard_normal(2048)) < -10

    def test_random_walk_levels_near_zero(self):
        rng = np.random.default_rng(0)
        levels = np.cumsum(rng.standard_normal(2048))
        assert adf_statistic(levels) > -3

    def test_too_short(self):
        with pytest.raises(StatisticError):
            adf_statistic(np.arange(10.0))

    def test_permutation_dependence(self):
        rng = np.random.default_rng(9)
        levels = np.cumsum(rng.standard_normal(512))
        assert abs(adf_statistic(levels)
                   - adf_statistic(rng.permutation(levels))) > 1.0


class TestGarchPersistence:
    def test_constant_series(self):
        with pytest.raises(StatisticError):
            garch_persistence(np.full(400, 0.1))

    def test_too_short(self):
        with pytest.raises(StatisticError):
            garch_persistence(np.random.default_rng(0).standard_normal(100))

    def test_recovers_persistence(self, clustered_returns):
        est = garch_persistence(clustered_returns.values)
        assert 0.7 < est < 1.0  # true alpha + beta = 0.97 at n = 600

    def test_white_noise_screened_to_zero(self):
        rng = np.random.default_rng(12)
        assert garch_persistence(rng.standard_normal(4096)) == 0.0

    def test_permutation_dependence(self, clustered_returns):
        x = clustered_returns.values
        shuffled = np.random.default_rng(2).permutation(x)
        assert garch_persistence(x) != garch_persistence(shuffled)


class TestHillTailAverage:
    def test_pareto_recovery(self):
        rng = np.random.default_rng(0)
        x = rng.pareto(3.0, size=20_000) + 1.0
        assert hill_tail_average(x) == pytest.approx(3.0, abs=0.4)

    def test_all_negative_rejected(self):
        with pytest.raises(StatisticError, match="empty right tail"):
            hill_tail_average(-np.abs(np.random.default_rng(0).standard_normal(200)) - 0.1)

    def test_too_few_band_statistics(self):
        # 120 observations but only 20 positive: the 90-95% band holds 2 ranks
        x = np.concatenate([-np.ones(100), np.linspace(1, 2, 20)])
        with pytest.raises(StatisticError, match="order statistics"):
            hill_tail_average(x)

    def test_too_short(self):
        with pytest.raises(StatisticError):
            hill_tail_average(np.ones(50))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        x = rng.pareto(2.0, size=5_000) + 1.0
        assert hill_tail_average(x) == hill_tail_average(rng.permutation(x))


class TestMomentVector:
    def test_identity_input(self, clustered_returns):
        mv = moment_vector(clustered_returns, clustered_returns)
        assert mv.ks_stat == 0.0
        mean, sd, kurt = sample_moments(clustered_returns)
        assert mv.mean == mean and mv.stdev == sd and mv.excess_kurtosis == kurt
        assert mv.hurst == hurst_exponent(clustered_returns)

    def test_component_error_names_component(self, clustered_returns):
        with pytest.raises(StatisticError, match="excess_kurtosis"):
            moment_vector(np.zeros(600), clustered_returns)

    def test_reproducible_bitwise(self, clustered_returns):
        a = moment_vector(clustered_returns, clustered_returns).as_array()
        b = moment_vector(clustered_returns, clustered_returns).as_array()
        assert np.array_equal(a, b)

    def test_canonical_order_roundtrip(self):
        arr = np.array([0.0, 1.0, 0.5, 0.2, 0.55, 0.1, -12.0, 0.9, 3.0])
        mv = MomentVector.from_array(arr)
        assert np.array_equal(mv.as_array(), arr)
        assert list(mv.to_dict()) == list(MOMENT_NAMES)

    def test_nonfinite_rejected(self):
        arr = np.array([0.0, 1.0, 0.5, 0.2, 0.55, 0.1, np.inf, 0.9, 3.0])
        with pytest.raises(StatisticError):
            MomentVector.from_array(arr)


class TestAcf:
    def test_iid_within_bartlett_band(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(10_000)
        vals = acf(x, 100)
        frac = np.mean(np.abs(vals) < 3.0 / np.sqrt(len(x)))
        assert frac >= 0.95

    def test_alternating_is_minus_one_at_lag_one(self):
        assert acf(np.tile([1.0, -1.0], 500), 1)[0] == pytest.approx(-1.0)

    def test_constant_rejected(self):
        with pytest.raises(StatisticError):
            acf(np.ones(50), 3)

    def test_max_lag_bounds(self):
        with pytest.raises(StatisticError):
            acf(np.arange(10.0), 10)

    def test_length(self):
        assert len(acf(np.random.default_rng(0).standard_normal(200), 17)) == 17
