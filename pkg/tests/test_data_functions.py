"""
Tests for the scenario data grammar: expressions, tabulated series and
vector-valued data functions.
"""

import os
import sys

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from data_functions import DataFunction, Expression, TabulatedSeries, compile_expression, read_series
from errors import ConfigurationError, SamplingError


@pytest.fixture
def ramp_csv(tmp_path):
    path = tmp_path / "ramp.csv"
    path.write_text("t,value\n0,0\n1,2\n2,2\n")
    return str(path)


class TestExpression:
    def test_evaluation(self):
        expr = Expression("t*sin(pi*x)")
        assert expr(2.0, np.array([0.5]), np.array([0.0]))[0] == pytest.approx(2.0)

    def test_caret_is_power(self):
        assert Expression("x^2")(0.0, np.array([3.0]), np.array([0.0]))[0] == pytest.approx(9.0)

    def test_constant_broadcasts(self):
        values = Expression(3.0)(0.0, np.zeros(4), np.zeros(4))
        assert values.shape == (4,)
        assert np.all(values == 3.0)

    def test_time_derivative(self):
        d = Expression("t^2*x").diff_t()
        assert d(3.0, np.array([2.0]), np.array([0.0]))[0] == pytest.approx(12.0)

    def test_zero(self):
        assert Expression(0.0).is_zero
        assert not Expression("x").is_zero

    def test_rejects_unknown_symbols(self):
        with pytest.raises(ConfigurationError):
            Expression("z*t", name="f")
        with pytest.raises(ConfigurationError):
            Expression("x +* 2", name="f")

    def test_time_only_callable(self):
        fn = compile_expression("cos(t)", space=False)
        assert float(fn(0.0)) == pytest.approx(1.0)


class TestTabulatedSeries:
    def test_interpolation_and_profile(self, ramp_csv):
        series = TabulatedSeries.from_csv(ramp_csv, profile="x")
        assert series.amplitude(0.5) == pytest.approx(1.0)
        assert series(0.5, np.array([3.0]), np.array([0.0]))[0] == pytest.approx(3.0)

    def test_right_continuous_slope(self, ramp_csv):
        slope = TabulatedSeries.from_csv(ramp_csv).diff_t()
        assert slope.amplitude(0.5) == pytest.approx(2.0)
        assert slope.amplitude(1.0) == pytest.approx(0.0)
        assert slope.amplitude(2.0) == pytest.approx(0.0)

    def test_outside_range(self, ramp_csv):
        with pytest.raises(SamplingError):
            TabulatedSeries.from_csv(ramp_csv).amplitude(2.5)

    def test_resolution(self, ramp_csv):
        series = TabulatedSeries.from_csv(ramp_csv)
        series.check_resolution(1.0)
        with pytest.raises(SamplingError):
            series.check_resolution(0.5)

    def test_bad_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,amp\n0,1\n1,2\n")
        with pytest.raises(ConfigurationError):
            read_series(str(path))


class TestDataFunction:
    def test_number_broadcasts(self):
        f = DataFunction.parse(2.0, 2, "f")
        assert np.array_equal(f(0.0, np.zeros((3, 2))), np.full((3, 2), 2.0))

    def test_component_count(self):
        with pytest.raises(ConfigurationError):
            DataFunction.parse("x", 2, "f")
        with pytest.raises(ConfigurationError):
            DataFunction.parse(["x", "y", "t"], 2, "f")

    def test_none_is_zero(self):
        assert DataFunction.parse(None, 3, "F").is_zero

    def test_mandel_scale(self):
        F = DataFunction.parse(["1", "2", "3"], 3, "F", scale=[1.0, 1.0, np.sqrt(2.0)])
        assert np.allclose(F(0.0, np.zeros((1, 2)))[0], [1.0, 2.0, 3.0 * np.sqrt(2.0)])

    def test_tabulated_component(self, ramp_csv):
        f = DataFunction.parse([{"csv": ramp_csv, "profile": "y"}], 1, "f")
        assert f(1.0, np.array([[0.0, 0.5]]))[0, 0] == pytest.approx(1.0)

    def test_interval_average(self):
        points = np.zeros((2, 2))
        assert np.allclose(DataFunction.parse("t", 1).interval_average(0.0, 1.0, points), 0.5)
        assert np.allclose(DataFunction.parse("t^3", 1).interval_average(0.0, 1.0, points, 1), 0.25)
