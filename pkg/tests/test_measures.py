"""Tests for laws, ambiguity sets and sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slln.errors import (
    EmptyAmbiguitySet,
    EmptySupport,
    LengthMismatch,
    NegativeProb,
    NotExactCapable,
    NotNormalizable,
)
from slln.measures import (
    SamplableDistribution,
    align_supports,
    bernoulli,
    classical_expectation,
    make_ambiguity_set,
    make_finite_distribution,
    sample,
    truncate,
)
from slln.rng import RandomStream, path_streams


class TestFiniteDistribution:

    def test_sorted_and_merged(self):
        d = make_finite_distribution([2, 0, 2], [0.25, 0.5, 0.25])
        assert d.support == (0.0, 2.0)
        assert d.probs == pytest.approx((0.5, 0.5))

    def test_near_one_total_is_rescaled(self):
        d = make_finite_distribution([0, 1], [0.5, 0.5 + 5e-10])
        assert math.fsum(d.probs) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("values, probs, error", [
        ([], [], EmptySupport),
        ([0, 1], [1.0], LengthMismatch),
        ([0, 1], [1.2, -0.2], NegativeProb),
        ([0, 1], [0.5, 0.6], NotNormalizable),
    ])
    def test_rejects_bad_input(self, values, probs, error):
        with pytest.raises(error):
            make_finite_distribution(values, probs)

    def test_moments_and_tails(self):
        d = make_finite_distribution([-1, 0, 2], [0.2, 0.5, 0.3])
        assert d.mean == pytest.approx(0.4)
        assert d.second_moment == pytest.approx(1.4)
        assert d.tail(0) == pytest.approx(0.8)
        assert d.abs_tail(1) == pytest.approx(0.5)
        assert d.truncated_mean(1) == pytest.approx(-0.2 + 0.3)
        assert d.excess_mean(1) == pytest.approx(0.3)

    def test_quantile_matches_cdf(self):
        d = bernoulli(0.3)
        assert d.quantile(0.0) == 0.0
        assert d.quantile(0.69) == 0.0
        assert d.quantile(0.71) == 1.0
        us = np.array([0.1, 0.69, 0.75, 0.99])
        assert list(d.quantiles(us)) == [0.0, 0.0, 1.0, 1.0]

    def test_truncate_requires_positive_level(self):
        assert truncate(5.0, 2.0) == 2.0
        assert truncate(-5.0, 2.0) == -2.0
        with pytest.raises(ValueError):
            truncate(1.0, 0.0)

    @given(st.lists(st.floats(min_value=0.01, max_value=10), min_size=1, max_size=6))
    def test_normalized_mass_is_one(self, weights):
        total = math.fsum(weights)
        d = make_finite_distribution(range(len(weights)), [w / total for w in weights])
        assert math.fsum(d.probs) == pytest.approx(1.0, abs=1e-12)


class TestSamplableDistribution:

    def test_pareto_moments(self):
        p1 = SamplableDistribution.pareto(1.0, 1.0)
        assert not p1.has_finite_mean
        assert p1.mean == math.inf
        p3 = SamplableDistribution.pareto(3.0, 2.0)
        assert p3.mean == pytest.approx(3.0)
        assert p3.second_moment == pytest.approx(12.0)
        assert SamplableDistribution.pareto(2.0).second_moment == math.inf

    def test_pareto_truncated_mean_closed_form(self):
        p = SamplableDistribution.pareto(1.0, 1.0)
        assert p.truncated_mean(math.e) == pytest.approx(2.0)
        assert p.excess_mean(10.0) == math.inf

    def test_pareto_quantile(self):
        p = SamplableDistribution.pareto(2.0, 1.0)
        assert p.quantile(0.75) == pytest.approx(2.0)
        assert p.tail(2.0) == pytest.approx(0.25)

    def test_discretized_is_exact(self):
        d = SamplableDistribution.discretized(1.0, 1.0, 1.0, 4.0)
        law = d.exact_law
        assert law.support == (1.0, 2.0, 3.0, 4.0)
        assert law.probs == pytest.approx((0.5, 1 / 6, 1 / 12, 0.25))
        assert d.has_finite_mean

    def test_record_round_trip(self):
        for law in (SamplableDistribution.finite_support(bernoulli(0.3)), SamplableDistribution.pareto(1.5, 2.0)):
            assert SamplableDistribution.from_record(law.to_record()) == law

    def test_bernoulli_record(self):
        law = SamplableDistribution.from_record({"kind": "bernoulli", "p": 0.25})
        assert law.finite.probs == pytest.approx((0.75, 0.25))

    def test_labels(self):
        assert SamplableDistribution.finite_support(bernoulli(0.7)).label == "Bern(0.7)"
        assert SamplableDistribution.pareto(1.0).label == "Pareto(1,1)"


class TestAmbiguitySet:

    def test_empty(self):
        with pytest.raises(EmptyAmbiguitySet):
            make_ambiguity_set([])

    def test_bounds_and_ties(self):
        aset = make_ambiguity_set([bernoulli(0.3), bernoulli(0.7), bernoulli(0.7)])
        assert aset.upper_mean == pytest.approx(0.7)
        assert aset.lower_mean == pytest.approx(0.3)
        assert aset.argmax_mean() == 1
        assert aset.argmin_mean() == 0
        assert aset.upper_tail(1.0) == pytest.approx(0.7)

    def test_exact_capable_needs_common_support(self):
        mixed = make_ambiguity_set([bernoulli(0.5), make_finite_distribution([0, 2], [0.5, 0.5])])
        assert not mixed.exact_capable
        with pytest.raises(NotExactCapable):
            mixed.prob_matrix
        aligned = align_supports(mixed)
        assert aligned.exact_capable
        assert aligned.support == (0.0, 1.0, 2.0)
        assert aligned.means == pytest.approx([0.5, 1.0])

    def test_heavy_tail_indices(self):
        aset = make_ambiguity_set([bernoulli(0.5), SamplableDistribution.pareto(1.0, 1.0)])
        assert aset.heavy_tail_indices() == [1]
        assert not aset.exact_capable
        assert aset.upper_mean == math.inf

    def test_classical_expectation(self):
        assert classical_expectation(bernoulli(0.25), lambda x: 4 * x) == pytest.approx(1.0)


class TestRandomStreams:

    def test_streams_are_reproducible(self):
        a = RandomStream(7, 3).uniforms(5)
        b = RandomStream(7, 3).uniforms(5)
        assert np.array_equal(a, b)

    def test_channels_differ(self):
        values, aux = path_streams(7, 0)
        assert values.key != aux.key
        assert not np.array_equal(values.uniforms(4), aux.uniforms(4))

    @settings(max_examples=25)
    @given(st.integers(min_value=0, max_value=2 ** 31), st.integers(min_value=0, max_value=1000))
    def test_uniforms_in_unit_interval(self, seed, path):
        u = RandomStream(seed, path).uniforms(16)
        assert np.all((u >= 0) & (u < 1))

    def test_sample_uses_inverse_cdf(self):
        stream = RandomStream(1)
        expected = RandomStream(1).uniform()
        assert sample(bernoulli(0.5), stream) == (1.0 if expected >= 0.5 else 0.0)
