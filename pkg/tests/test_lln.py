"""Mean bounds, maximal inequalities and the strong-law path experiments."""

import math

import numpy as np
import pytest

from slln import fixtures
from slln.errors import (
    HorizonTooSmall,
    InvariantViolation,
    MuOutOfBand,
    NoHeavyTailLaw,
    TargetOrderError,
    TargetOutOfBracket,
    WeightConditionFails,
)
from slln.experiments import tolerance_overrides
from slln.lln import (
    ExperimentReport,
    InequalityReport,
    MeanBoundsSequence,
    cluster_schedule,
    cluster_set_experiment,
    coordinate_bracket,
    default_strategy_battery,
    divergence_experiment,
    estimate_mu_limits,
    extreme_laws,
    kolmogorov_report,
    lower_capacity_maximal_check,
    mean_bounds_sequence,
    mixing_weight,
    mu_tracking_experiment,
    observable_law_means,
    second_moment_sum,
    theorem1_experiment,
)
from slln.strategies import ConstantStrategy


class TestMeanBounds:

    def test_moving_average_is_flat(self, moving_average):
        seq = mean_bounds_sequence(moving_average, 40)
        assert np.allclose(seq.upper_means, 0.7)
        assert np.allclose(seq.lower_means, 0.3)
        assert seq.bracket == pytest.approx((0.3, 0.7))

    @pytest.mark.slow
    def test_moving_average_exact_to_two_hundred(self, moving_average):
        seq = mean_bounds_sequence(moving_average, 200)
        assert seq.n_values == tuple(range(1, 201))
        assert max(abs(u - 0.7) for u in seq.upper_means) <= 1e-10
        assert max(abs(lo - 0.3) for lo in seq.lower_means) <= 1e-10

    def test_selected_horizons(self, two_bernoulli):
        seq = mean_bounds_sequence(two_bernoulli, 64, n_values=[64, 1, 8])
        assert seq.n_values == (1, 8, 64)
        assert len(seq.rows()) == 6

    def test_sign_flip(self, two_bernoulli):
        seq = mean_bounds_sequence(two_bernoulli, 8, scale=-1.0)
        assert seq.upper_means[0] == pytest.approx(-0.3)
        assert seq.lower_means[0] == pytest.approx(-0.7)
        assert seq.bracket == pytest.approx((-0.7, -0.3))

    def test_bad_horizons(self, two_bernoulli):
        with pytest.raises(HorizonTooSmall):
            mean_bounds_sequence(two_bernoulli, 8, n_values=[9])

    def test_bracket_is_enforced(self):
        with pytest.raises(InvariantViolation):
            MeanBoundsSequence((1,), (0.9,), (0.3,), (0.3, 0.7))

    def test_independent_bracket(self):
        assert coordinate_bracket(fixtures.independent_bounded()) == pytest.approx((0.0, 0.7))

    def test_converged_estimate(self, moving_average):
        estimate = estimate_mu_limits(mean_bounds_sequence(moving_average, 32))
        assert estimate.converged
        assert estimate.mu_bar == pytest.approx(0.7)
        assert estimate.mu_under == pytest.approx(0.3)
        assert estimate.doublings == (1, 2, 4, 8, 16)

    def test_alternating_epochs_do_not_converge(self):
        seq = mean_bounds_sequence(fixtures.alternating_epochs(64), 64)
        assert seq.upper_means[63] == pytest.approx(22 / 64)
        assert seq.upper_means == pytest.approx(seq.lower_means)
        estimate = estimate_mu_limits(seq)
        assert not estimate.converged
        assert estimate.upper_deltas[-1] > 0.25
        assert {r["flag"] for r in estimate.rows()} == {"not-converged"}

    def test_trend_needs_a_horizon(self, two_bernoulli):
        with pytest.raises(HorizonTooSmall):
            estimate_mu_limits(mean_bounds_sequence(two_bernoulli, 4))


class TestMaximalInequalities:

    def test_kolmogorov_classical(self, singleton):
        report = kolmogorov_report(singleton, 2, 1.0)
        assert report.lhs == pytest.approx(0.25)
        assert report.rhs == pytest.approx(1.0)
        assert report.extras["C_hat"] == pytest.approx(0.25)
        assert report.extras["B2"] == pytest.approx(1.0)
        assert report.asserted and report.passed

    def test_kolmogorov_lower_side(self, singleton):
        assert kolmogorov_report(singleton, 2, 1.0, upper=False).lhs == pytest.approx(0.25)

    def test_kolmogorov_with_ambiguity_is_reported_only(self, two_bernoulli):
        report = kolmogorov_report(two_bernoulli, 6, 1.5)
        assert not report.asserted
        assert report.rhs == math.inf
        assert report.ok
        assert 0.0 <= report.lhs <= 1.0
        assert report.extras["B2"] == pytest.approx(6 * 0.7)

    def test_kolmogorov_rejects_bad_parameters(self, singleton):
        with pytest.raises(ValueError):
            kolmogorov_report(singleton, 2, 1.0, delta=1.5)
        with pytest.raises(ValueError):
            kolmogorov_report(singleton, 2, -1.0)

    def test_lower_capacity_bound(self, two_bernoulli):
        report = lower_capacity_maximal_check(two_bernoulli, 2, 0.5, 1.0)
        assert report.lhs == pytest.approx(0.3)
        assert report.rhs == pytest.approx(2.8)
        assert report.passed

    def test_lower_capacity_large_x(self, two_bernoulli):
        assert lower_capacity_maximal_check(two_bernoulli, 2, 0.5, 1.5).lhs == pytest.approx(0.0)

    def test_lower_capacity_singleton(self, singleton):
        assert lower_capacity_maximal_check(singleton, 2, 0.5, 1.0).lhs == pytest.approx(0.5)

    def test_lower_capacity_time_varying_centers(self, two_bernoulli):
        report = lower_capacity_maximal_check(two_bernoulli, 4, [0.3, 0.7, 0.5, 0.4], 1.0)
        assert report.passed

    def test_mu_out_of_band(self, two_bernoulli):
        with pytest.raises(MuOutOfBand):
            lower_capacity_maximal_check(two_bernoulli, 2, 0.9, 1.0)
        with pytest.raises(MuOutOfBand):
            lower_capacity_maximal_check(two_bernoulli, 3, [0.5, 0.5], 1.0)

    def test_moving_window_is_not_asserted(self, moving_average):
        assert not lower_capacity_maximal_check(moving_average, 3, 0.5, 1.0).asserted

    def test_second_moment_sum(self, moving_average):
        # E[((e1 + e2)/2)^2] is maximised by the high law on both drivers
        assert second_moment_sum(moving_average, 4) == pytest.approx(4 * (0.7 + 2 * 0.49 + 0.7) / 4)

    def test_report_rows(self):
        report = InequalityReport("x", 2.0, 1.0, asserted=False, extras={"C_hat": 3.0})
        assert report.ok and not report.passed
        assert report.ratio == pytest.approx(2.0)
        assert [r["quantity"] for r in report.rows()] == ["lhs", "rhs", "C_hat"]
        assert {r["flag"] for r in report.rows()} == {"violation"}


class TestExtremeLaws:

    def test_observable_means(self, moving_average):
        assert observable_law_means(moving_average) == pytest.approx([0.3, 0.7])

    def test_independent_cycle_average(self):
        hi, lo, high, low = extreme_laws(fixtures.independent_bounded())
        assert (hi, lo) == (1, 0)
        assert (high, low) == pytest.approx((0.5, 0.15))

    @pytest.mark.parametrize("target, expected", [(0.5, 0.5), (0.7, 1.0), (0.2, 0.0), (1.0, 1.0)])
    def test_mixing_weight(self, target, expected):
        assert mixing_weight(target, 0.7, 0.3) == pytest.approx(expected)

    def test_degenerate_mixing(self):
        assert mixing_weight(0.4, 0.5, 0.5) == 1.0


class TestCluster:

    def test_schedule_epochs(self):
        schedule = cluster_schedule(100, 0.4, 0.6, 2.0, 1, 0, 0.7, 0.3)
        assert [e.length for e in schedule.epochs] == [1, 2, 8, 64, 1024]
        assert not schedule.repeat
        assert dict(schedule.epochs[0].weights)[1] == pytest.approx(0.25)
        assert dict(schedule.epochs[1].weights)[1] == pytest.approx(0.75)

    def test_targets_must_be_ordered(self, two_bernoulli):
        with pytest.raises(TargetOrderError):
            cluster_set_experiment(two_bernoulli, 0.6, 0.4, n=1000)

    def test_targets_inside_bracket(self, two_bernoulli):
        with pytest.raises(TargetOutOfBracket):
            cluster_set_experiment(two_bernoulli, 0.4, 0.8, n=1000)

    def test_single_point_cluster(self, two_bernoulli):
        report = cluster_set_experiment(two_bernoulli, 0.5, 0.5, n=100_000, seed=1)
        assert report.passed
        assert report.summary["final_mean"] == pytest.approx(0.5, abs=0.02)

    def test_rows_and_reproducibility(self, two_bernoulli):
        one = cluster_set_experiment(two_bernoulli, 0.4, 0.6, n=20_000, seed=5)
        two = cluster_set_experiment(two_bernoulli, 0.4, 0.6, n=20_000, seed=5)
        assert one.summary == two.summary
        assert one.summary["limsup"] >= one.summary["liminf"]
        assert {r["experiment"] for r in one.rows} == {"cluster"}
        assert one.summary["lambda_a"] == pytest.approx(0.25)

    @pytest.mark.slow
    def test_cluster_set_is_visited(self, two_bernoulli):
        report = cluster_set_experiment(two_bernoulli, 0.4, 0.6, epoch_growth=2.0, n=10 ** 6, seed=0)
        assert report.passed, report.summary
        assert report.summary["limsup"] >= 0.55
        assert report.summary["liminf"] <= 0.45
        assert report.summary["coverage"] >= 0.9

    @pytest.mark.slow
    def test_cluster_on_moving_average(self, moving_average):
        report = cluster_set_experiment(moving_average, 0.35, 0.65, n=10 ** 6, seed=3)
        assert report.passed, report.summary

    @pytest.mark.slow
    def test_cluster_fills_whole_bracket(self, moving_average):
        report = cluster_set_experiment(moving_average, 0.3, 0.7, n=10 ** 6, seed=42)
        assert report.passed, report.summary
        assert report.summary["limsup"] >= 0.65
        assert report.summary["liminf"] <= 0.35
        assert report.summary["coverage"] >= 0.9


class TestDivergence:

    def test_heavy_tail_diverges(self):
        report = divergence_experiment(fixtures.heavy_tail(), n=100_000, n_paths=30, seed=0,
                                       first_checkpoint=100)
        assert report.summary["choquet_diverging"]
        assert report.summary["growing_fraction"] >= 0.7
        assert report.summary["median_last"] > report.summary["median_first"]
        assert report.summary["law"] == 1

    def test_unrestarted_running_sup_is_reported(self):
        report = divergence_experiment(fixtures.heavy_tail(), n=20_000, n_paths=12, seed=2,
                                       first_checkpoint=100)
        summary = report.summary
        # a new record of the full sup is also a new record after the restart
        assert summary["running_sup_growing_fraction"] <= summary["growing_fraction"]
        assert summary["median_running_sup_last"] >= summary["median_last"]
        statistics = {r["statistic"] for r in report.rows}
        assert statistics == {"median_sup_abs_mean", "median_running_sup"}

    def test_growth_fraction_follows_config(self):
        with tolerance_overrides({"divergence_ratio": 1.01}):
            report = divergence_experiment(fixtures.heavy_tail(), n=20_000, n_paths=8, seed=0,
                                           first_checkpoint=100)
        assert not report.passed
        assert report.summary["choquet_diverging"]

    def test_pareto2_control_is_not_divergent(self):
        report = divergence_experiment(fixtures.pareto2_control(), n=20_000, n_paths=10, seed=0,
                                       first_checkpoint=100, law_index=0)
        assert not report.summary["choquet_diverging"]
        assert not report.passed

    def test_needs_heavy_tail(self, two_bernoulli):
        with pytest.raises(NoHeavyTailLaw):
            divergence_experiment(two_bernoulli, n=1000, n_paths=2)

    @pytest.mark.slow
    def test_acceptance_scale(self):
        report = divergence_experiment(fixtures.heavy_tail(), n=10 ** 6, n_paths=100, seed=0)
        assert report.passed, report.summary
        assert report.summary["growing_fraction"] >= 0.9
        assert report.summary["median_last"] > 1.5 * report.summary["median_first"]


class TestTheorem1:

    def test_linear_weights(self, two_bernoulli):
        report = theorem1_experiment(two_bernoulli, lambda i: i, 100_000, seed=4)
        assert report.passed, report.summary
        assert report.summary["strategies"] == len(default_strategy_battery(two_bernoulli))
        assert {r["statistic"] for r in report.rows} == {"upper_centered", "lower_centered"}

    def test_explicit_strategies_and_list_weights(self):
        model = fixtures.independent_bounded()
        a = [float(i) for i in range(1, 10_001)]
        report = theorem1_experiment(model, a, 10_000, seed=0, strategies=[ConstantStrategy(1)])
        assert report.passed, report.summary

    def test_divergent_weights(self, two_bernoulli):
        with pytest.raises(WeightConditionFails):
            theorem1_experiment(two_bernoulli, np.sqrt, 4096, seed=0)

    def test_needs_independence(self, moving_average):
        with pytest.raises(WeightConditionFails):
            theorem1_experiment(moving_average, lambda i: i, 1000, seed=0)

    def test_short_weight_list(self, two_bernoulli):
        with pytest.raises(HorizonTooSmall):
            theorem1_experiment(two_bernoulli, [1.0, 2.0], 10, seed=0)

    @pytest.mark.slow
    def test_three_quarter_power(self, two_bernoulli):
        report = theorem1_experiment(two_bernoulli, lambda i: i ** 0.75, 10 ** 6, seed=0)
        assert report.passed, report.summary


class TestTracking:

    def test_constant_target(self, two_bernoulli):
        report = mu_tracking_experiment(two_bernoulli, [0.5] * 50_000, 50_000, seed=2)
        assert report.passed
        assert report.summary["final_gap"] < 0.02

    def test_periodic_target(self, two_bernoulli):
        mus = lambda i: 0.5 + 0.15 * np.sin(i / 1000.0)  # noqa: E731
        assert mu_tracking_experiment(two_bernoulli, mus, 50_000, seed=2).passed

    def test_target_outside_band(self, two_bernoulli):
        with pytest.raises(MuOutOfBand):
            mu_tracking_experiment(two_bernoulli, [0.9] * 100, 100, seed=0)


def test_experiment_report_ok():
    report = ExperimentReport("x", False, {"v": 1.0}, asserted=False)
    assert report.ok
    assert report.summary_rows()[0]["flag"] == "reported"
