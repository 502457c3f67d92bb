"""Capacities, Choquet integrals and extended expectations."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slln import fixtures
from slln.capacity import (
    CapacityCurve,
    EventPredicate,
    borel_cantelli_report,
    capacity_curve,
    choquet_dominance_check,
    choquet_finiteness_diagnostics,
    choquet_integral_finite,
    choquet_integral_quadrature,
    everything,
    extended_additivity_check,
    extended_expectation,
    lower_capacity,
    mc_capacity_lower_bound,
    nothing,
    upper_capacity,
)
from slln.errors import GridTooCoarse, ModelError, NotConvergedError
from slln.experiments import tolerance_overrides
from slln.functionals import coordinate, partial_sum
from slln.strategies import ConstantStrategy

from .conftest import bern_model


def first_at_least(level, n=1):
    return EventPredicate.at_least(coordinate(n, 1), level)


class TestCapacities:

    def test_bernoulli_pair(self, two_bernoulli):
        assert upper_capacity(two_bernoulli, first_at_least(1)) == pytest.approx(0.7)
        assert lower_capacity(two_bernoulli, first_at_least(1)) == pytest.approx(0.3)

    def test_whole_space_and_empty_set(self, three_point):
        assert upper_capacity(three_point, everything(2)) == pytest.approx(1.0)
        assert upper_capacity(three_point, nothing(2)) == pytest.approx(0.0)
        assert lower_capacity(three_point, everything(2)) == pytest.approx(1.0)

    def test_non_additive(self, two_bernoulli):
        event = first_at_least(1)
        both = upper_capacity(two_bernoulli, event) + upper_capacity(two_bernoulli, event.complement())
        assert both == pytest.approx(1.4)

    def test_conjugacy(self, moving_average):
        event = EventPredicate.at_least(partial_sum(3), 2.0)
        assert lower_capacity(moving_average, event) <= upper_capacity(moving_average, event) + 1e-12

    def test_monte_carlo_lower_bound(self, two_bernoulli):
        event = EventPredicate.at_least(partial_sum(3), 3.0)
        exact = upper_capacity(two_bernoulli, event)
        assert exact == pytest.approx(0.343)
        est = mc_capacity_lower_bound(two_bernoulli, event, [ConstantStrategy(0), ConstantStrategy(1)],
                                      n_paths=5000, seed=11)
        assert est.strategy == ConstantStrategy(1).name
        assert est.value == pytest.approx(exact, abs=5 * est.stderr)
        assert set(est.per_strategy) == {ConstantStrategy(0).name, ConstantStrategy(1).name}

    def test_monte_carlo_needs_strategies(self, two_bernoulli):
        with pytest.raises(ModelError):
            mc_capacity_lower_bound(two_bernoulli, first_at_least(1), [], 10, 0)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=0.0, max_value=1.0))
    def test_upper_dominates_lower(self, p, q):
        model = bern_model(p, q)
        event = EventPredicate.at_least(partial_sum(2), 1.0)
        assert lower_capacity(model, event) <= upper_capacity(model, event) + 1e-12


class TestChoquet:

    def test_curve(self, three_point):
        curve = capacity_curve(three_point)
        assert curve.thresholds == (-1.0, 0.0, 2.0)
        assert curve.values == pytest.approx((1.0, 0.8, 0.3))
        assert curve.at(1.0) == pytest.approx(0.3)
        assert curve.at(5.0) == 0.0

    def test_curve_validation(self):
        with pytest.raises(ModelError):
            CapacityCurve((0.0, 1.0), (0.2, 0.5))
        with pytest.raises(ModelError):
            CapacityCurve((1.0, 0.0), (0.5, 0.2))

    def test_layer_cake_with_negative_values(self, three_point):
        assert choquet_integral_finite(three_point) == pytest.approx(0.4)

    def test_layer_cake_of_bernoulli(self, two_bernoulli):
        assert choquet_integral_finite(two_bernoulli) == pytest.approx(0.7)

    def test_quadrature_matches_layer_cake(self, three_point):
        from slln.functionals import absolute
        X = absolute(coordinate(1, 1))
        exact = choquet_integral_finite(three_point, X)
        result = choquet_integral_quadrature(three_point, 4.0, X=X)
        assert exact == pytest.approx(1.2)
        assert result.value == pytest.approx(exact, abs=1e-9)

    def test_quadrature_heavy_tail_diverges(self):
        result = choquet_integral_quadrature(fixtures.heavy_tail(), 2.0 ** 12)
        assert result.diverging
        assert result.octave_increments[-1] == pytest.approx(math.log(2), rel=1e-3)

    def test_quadrature_pareto2_converges(self):
        result = choquet_integral_quadrature(fixtures.pareto2_control(), 1024.0)
        assert not result.diverging
        assert result.value == pytest.approx(2.0 - 1.0 / 1024, rel=1e-4)

    def test_quadrature_rejects_increasing_tail(self):
        with pytest.raises(GridTooCoarse):
            choquet_integral_quadrature(lambda t: min(1.0, t), 4.0)

    def test_dominance(self, three_point):
        report = choquet_dominance_check(three_point)
        assert report.passed
        assert report.details["choquet"] == pytest.approx(1.2)
        assert report.details["abs_mean"] == pytest.approx(1.2)


class TestExtendedExpectation:

    def test_bounded_converges(self, two_bernoulli):
        result = extended_expectation(two_bernoulli).require()
        assert result.converged
        assert result.value == pytest.approx(0.7)

    def test_lower_side(self, two_bernoulli):
        assert extended_expectation(two_bernoulli, upper=False).value == pytest.approx(0.3)

    def test_heavy_tail_does_not_converge(self):
        result = extended_expectation(fixtures.heavy_tail(), doublings=20)
        assert not result.converged
        # E[Pareto(1)^(c)] = 1 + log c
        assert result.values[-1] == pytest.approx(1.0 + math.log(2.0 ** 20))
        with pytest.raises(NotConvergedError):
            result.require()

    def test_additivity(self, two_bernoulli):
        report = extended_additivity_check(two_bernoulli, 3)
        assert report.passed
        assert report.details["upper"] == pytest.approx(2.1)
        assert report.details["lower"] == pytest.approx(0.9)

    def test_bad_levels(self, two_bernoulli):
        with pytest.raises(ModelError):
            extended_expectation(two_bernoulli, c_schedule=[1.0, 0.0])


class TestFiniteness:

    def test_heavy_tail_is_flagged(self):
        report = choquet_finiteness_diagnostics(fixtures.heavy_tail(), I_max=1024)
        assert report.diverging
        assert not report.excess_to_zero

    def test_pareto2_is_summable(self):
        report = choquet_finiteness_diagnostics(fixtures.pareto2_control(), I_max=1024)
        assert report.summable
        assert report.excess_to_zero

    def test_bounded_is_summable(self, three_point):
        report = choquet_finiteness_diagnostics(three_point, I_max=64)
        assert report.summable
        assert report.excess[-1] == 0.0
        assert any(r["quantity"] == "tail_partial_sum" for r in report.rows())

    def test_borel_cantelli(self):
        assert borel_cantelli_report([1.0 / i ** 2 for i in range(1, 1025)]).summable
        assert borel_cantelli_report([1.0 / i for i in range(1, 1025)]).diverging
        with pytest.raises(ModelError):
            borel_cantelli_report([-1.0])


class TestRatioSettings:
    """Each octave-ratio setting moves only its own verdict."""

    harmonic = [1.0 / i for i in range(1, 1025)]

    @staticmethod
    def pareto1_tail(t):
        return min(1.0, 1.0 / t) if t > 0 else 1.0

    def test_defaults(self):
        assert borel_cantelli_report(self.harmonic).diverging
        assert choquet_integral_quadrature(self.pareto1_tail, 2.0 ** 10).diverging

    def test_series_ratio_leaves_quadrature_alone(self):
        with tolerance_overrides({"series_ratio": 1.5}):
            assert borel_cantelli_report(self.harmonic).summable
            assert choquet_integral_quadrature(self.pareto1_tail, 2.0 ** 10).diverging

    def test_quadrature_ratio_leaves_series_alone(self):
        with tolerance_overrides({"quadrature_ratio": 1.5}):
            assert not choquet_integral_quadrature(self.pareto1_tail, 2.0 ** 10).diverging
            assert borel_cantelli_report(self.harmonic).diverging

    def test_growth_fraction_leaves_both_alone(self):
        with tolerance_overrides({"divergence_ratio": 0.0}):
            assert borel_cantelli_report(self.harmonic).diverging
            assert choquet_integral_quadrature(self.pareto1_tail, 2.0 ** 10).diverging
