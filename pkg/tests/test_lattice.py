import math
from fractions import Fraction

import pytest

from slln import fixtures
from slln.engine import FULL, LATTICE, upper_expectation
from slln.errors import ModelError, StateSpaceCap
from slln.functionals import crossing_indicator, max_partial_sum_deviation, partial_sum, power
from slln.lattice import LatticeDP, NotLattice, lattice_step
from slln.measures import make_ambiguity_set, make_finite_distribution
from slln.sequences import make_iid_model


def off_lattice_model():
    return make_iid_model(make_ambiguity_set([
        make_finite_distribution([0.0, 1.0, math.pi * 1e-7], [0.5, 0.25, 0.25]),
        make_finite_distribution([0.0, 1.0, math.pi * 1e-7], [0.1, 0.8, 0.1]),
    ]))


class TestLatticeStep:

    @pytest.mark.parametrize("values, step", [
        ([0.0, 1.0], Fraction(1)),
        ([0.0, 0.5, 1.0], Fraction(1, 2)),
        ([-1.0, 0.0, 2.0], Fraction(1)),
        ([0.25, 0.75], Fraction(1, 4)),
        ([0.0], Fraction(1)),
    ])
    def test_step(self, values, step):
        assert lattice_step(values) == step

    def test_off_lattice(self):
        with pytest.raises(NotLattice):
            lattice_step([1.0, math.pi * 1e-7])


class TestLatticeDP:

    def test_sum_over_long_horizon(self, two_bernoulli):
        dp = LatticeDP(two_bernoulli, partial_sum(500).statistic, 500)
        assert dp.value() == pytest.approx(350.0)
        assert dp.value(100) == pytest.approx(70.0)
        # partial sums of 0/1 values: t + 1 states after t steps
        assert dp.state_count == sum(t + 1 for t in range(501))

    def test_shorter_horizons_match_fresh_graphs(self, moving_average):
        phi = power(partial_sum(6), 2)
        dp = LatticeDP(moving_average, phi.statistic, 6)
        for n in (2, 4, 6):
            fresh = upper_expectation(moving_average, power(partial_sum(n), 2), method=FULL)
            assert dp.value(n, outer=lambda v: v * v) == pytest.approx(fresh, abs=1e-12)

    def test_horizon_outside_graph(self, two_bernoulli):
        dp = LatticeDP(two_bernoulli, partial_sum(3).statistic, 3)
        with pytest.raises(ModelError):
            dp.value(4)

    def test_crossing_matches_full_dp(self, three_point):
        phi = crossing_indicator(4, 2.0, centers=[0.3 * k for k in range(1, 5)], two_sided=True)
        assert upper_expectation(three_point, phi, method=LATTICE) == pytest.approx(
            upper_expectation(three_point, phi, method=FULL), abs=1e-12)

    def test_running_max_matches_full_dp(self, moving_average):
        phi = max_partial_sum_deviation(5, centers=[0.5 * k for k in range(1, 6)])
        assert upper_expectation(moving_average, phi, method=LATTICE) == pytest.approx(
            upper_expectation(moving_average, phi, method=FULL), abs=1e-12)

    def test_state_cap(self, three_point):
        with pytest.raises(StateSpaceCap):
            LatticeDP(three_point, partial_sum(50).statistic, 50, state_cap=100)

    def test_off_lattice_falls_back_to_full(self):
        model = off_lattice_model()
        with pytest.raises(NotLattice):
            upper_expectation(model, partial_sum(3), method=LATTICE)
        assert upper_expectation(model, partial_sum(3)) == pytest.approx(
            upper_expectation(model, partial_sum(3), method=FULL))

    def test_independent_drivers(self):
        model = fixtures.independent_bounded()
        assert upper_expectation(model, partial_sum(40), method=LATTICE) == pytest.approx(20 * (0.7 + 0.3))
