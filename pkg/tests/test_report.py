import numpy as np
import pytest

from farmerjoshi.market import DEFAULT_PARAMETERS, simulate
from farmerjoshi.report import (
    acf_rows,
    moments_table_rows,
    price_band_rows,
    qq_rows,
    return_path_rows,
    strategy_series_rows,
)
from farmerjoshi.stats import MOMENT_NAMES, MomentVector


@pytest.fixture(scope="module")
def outputs():
    p = DEFAULT_PARAMETERS.with_values(n_traders=20)
    return [simulate(p, "adaptive", 300, p0=0.0, seed=100 + s) for s in range(4)]


class TestPriceBands:
    def test_single_simulation_bands_collapse(self, outputs):
        rows = list(price_band_rows(outputs[:1]))
        for row in rows[1:]:
            assert row[1] == row[2] == row[3] == row[4]

    def test_band_orders_and_length(self, outputs):
        rows = list(price_band_rows(outputs))
        assert len(rows) == 1 + len(outputs[0].log_prices)
        for row in rows[1:]:
            assert float(row[1]) <= float(row[2]) <= float(row[3])

    def test_empirical_column_appended(self, outputs):
        emp = np.linspace(0.0, 1.0, 50)
        rows = list(price_band_rows(outputs, emp))
        assert rows[0][-1] == "empirical"
        assert float(rows[1][-1]) == 0.0
        assert rows[60][-1] == ""  # beyond the empirical length


class TestReturnPaths:
    def test_shape(self, outputs):
        rows = list(return_path_rows(outputs))
        assert len(rows) == 1 + len(outputs[0].log_returns)

    def test_single_simulation_bands_collapse(self, outputs):
        rows = list(return_path_rows(outputs[:1]))
        for row in rows[1:]:
            assert row[1] == row[2] == row[3]


class TestAcfRows:
    def test_length_equals_max_lag(self, outputs, clustered_returns):
        rows = list(acf_rows(outputs, clustered_returns, max_lag=17))
        assert len(rows) == 18
        assert rows[1][0] == 1 and rows[-1][0] == 17

    def test_bartlett_band_value(self, outputs, clustered_returns):
        rows = list(acf_rows(outputs, clustered_returns, max_lag=3))
        band = float(rows[1][-1])
        assert band == pytest.approx(1.96 / np.sqrt(len(outputs[0].log_returns)))


class TestQqRows:
    def test_point_count_and_monotonicity(self, outputs, clustered_returns):
        rows = list(qq_rows(outputs, clustered_returns, points=25))
        assert len(rows) == 26
        theo = [float(r[1]) for r in rows[1:]]
        emp = [float(r[2]) for r in rows[1:]]
        assert theo == sorted(theo)
        assert emp == sorted(emp)


class TestStrategySeries:
    def test_counts_sum_to_n(self, outputs):
        rows = list(strategy_series_rows(outputs[0]))
        n = DEFAULT_PARAMETERS.with_values(n_traders=20).n_traders
        for row in rows[1:]:
            assert row[1] + row[2] == n


class TestMomentsTable:
    def test_stubbed_constant_vectors_zero_width(self):
        mv = MomentVector.from_array(
            np.array([0.0, 1.0, 0.5, 0.2, 0.55, 0.1, -12.0, 0.9, 3.0]))
        rows = list(moments_table_rows([mv] * 100, mv))
        assert len(rows) == 1 + len(MOMENT_NAMES)
        # width is zero up to percentile-interpolation rounding noise
        for row in rows[1:]:
            lo, hi, mean = float(row[2]), float(row[3]), float(row[1])
            assert hi - lo == pytest.approx(0.0, abs=1e-12)
            assert lo == pytest.approx(mean, rel=1e-12, abs=1e-12)

    def test_empirical_column(self):
        arr = np.array([0.0, 1.0, 0.5, 0.2, 0.55, 0.1, -12.0, 0.9, 3.0])
        sims = [MomentVector.from_array(arr + 0.01 * k) for k in range(5)]
        emp = MomentVector.from_array(arr)
        rows = list(moments_table_rows(sims, emp))
        for i, row in enumerate(rows[1:]):
            assert row[0] == MOMENT_NAMES[i]
            assert float(row[4]) == arr[i]
