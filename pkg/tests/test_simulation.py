"""Adversary strategies and path simulation."""

import numpy as np
import pytest

from slln import fixtures
from slln.errors import InvalidStrategy
from slln.rng import RandomStream
from slln.simulation import PathSimulator, geometric_checkpoints, simulate_driver_paths, simulate_paths
from slln.strategies import (
    ConstantStrategy,
    Epoch,
    EpochSchedule,
    HookStrategy,
    LastValueStrategy,
    TrackingSchedule,
)


class TestStrategies:

    def test_epoch_schedule_repeats(self):
        schedule = EpochSchedule.from_pairs([(2, 0), (3, 1)])
        assert schedule.law_indices(0, 10, 2).tolist() == [0, 0, 1, 1, 1, 0, 0, 1, 1, 1]
        assert schedule.law_index((0.0, 1.0)) == 1

    def test_epoch_schedule_without_repeat_stays_in_last_epoch(self):
        schedule = EpochSchedule.from_pairs([(2, 0), (3, 1)], repeat=False)
        assert schedule.law_indices(3, 5, 2).tolist() == [1] * 5

    def test_mixed_epoch_needs_aux_stream(self):
        schedule = EpochSchedule([Epoch.mixed(4, {0: 1.0, 1: 1.0})])
        assert schedule.randomized
        with pytest.raises(InvalidStrategy):
            schedule.law_indices(0, 4, 2)
        with pytest.raises(InvalidStrategy):
            schedule.law_index(())
        laws = schedule.law_indices(0, 4000, 2, RandomStream(5, 0, 1))
        assert 0.45 < laws.mean() < 0.55

    def test_mixed_weights_are_normalised(self):
        epoch = Epoch.mixed(3, {1: 3.0, 0: 1.0})
        assert epoch.weights == ((0, 0.25), (1, 0.75))
        with pytest.raises(InvalidStrategy):
            Epoch.mixed(3, {0: 0.0})

    def test_bad_epochs(self):
        with pytest.raises(InvalidStrategy):
            EpochSchedule([])
        with pytest.raises(InvalidStrategy):
            EpochSchedule.from_pairs([(2, 5)]).validate(2)

    def test_constant_index_checked(self):
        with pytest.raises(InvalidStrategy):
            ConstantStrategy(2).validate(2)

    def test_tracking_weights(self):
        tracking = TrackingSchedule(1, 0, lambda steps: np.full(len(steps), 0.25))
        assert tracking.step_weights((), 2).tolist() == [0.75, 0.25]
        bad = TrackingSchedule(1, 0, lambda steps: np.full(len(steps), 1.5))
        with pytest.raises(InvalidStrategy):
            bad.step_weights((), 2)

    def test_last_value(self):
        strategy = LastValueStrategy(first=1, on_value={0.0: 0}, default=1)
        assert strategy.law_index(()) == 1
        assert strategy.law_index((1.0, 0.0)) == 0
        assert strategy.law_index((0.0, 1.0)) == 1
        with pytest.raises(InvalidStrategy):
            LastValueStrategy(first=3, on_value={}).validate(2)

    def test_bulk_scheduling_needs_history_free_strategy(self):
        with pytest.raises(InvalidStrategy):
            HookStrategy(lambda h: 0).law_indices(0, 3, 2)


class TestSimulation:

    def test_checkpoints(self):
        assert geometric_checkpoints(1000) == [10, 100, 1000]
        assert geometric_checkpoints(5) == [5]
        assert geometric_checkpoints(250, first=10, ratio=4) == [10, 40, 160, 250]

    def test_paths_are_reproducible_across_thread_counts(self, two_bernoulli):
        one = simulate_paths(two_bernoulli, ConstantStrategy(1), 2000, 6, [10, 100, 2000], seed=9, threads=1)
        many = simulate_paths(two_bernoulli, ConstantStrategy(1), 2000, 6, [10, 100, 2000], seed=9, threads=4)
        assert [p.sums for p in one] == [p.sums for p in many]
        assert [p.path_index for p in many] == list(range(6))

    def test_paths_differ_between_indices(self, two_bernoulli):
        a, b = simulate_paths(two_bernoulli, ConstantStrategy(0), 500, 2, [500], seed=1, threads=1)
        assert a.sums != b.sums

    def test_chunk_size_does_not_change_the_path(self, moving_average):
        small = PathSimulator(moving_average, ConstantStrategy(1), seed=4, chunk=7)
        large = PathSimulator(moving_average, ConstantStrategy(1), seed=4)
        checkpoints = [5, 50, 333]
        a, b = small.run(0, 333, checkpoints), large.run(0, 333, checkpoints)
        assert a.sums == pytest.approx(b.sums)
        assert a.running_sup == pytest.approx(b.running_sup)
        assert np.allclose(small.running_means(0, 333)[np.array(checkpoints) - 1], a.running_means)

    def test_running_mean_settles(self, two_bernoulli):
        stats = simulate_paths(two_bernoulli, ConstantStrategy(1), 100_000, 1, [100_000], seed=2)[0]
        assert stats.running_means[-1] == pytest.approx(0.7, abs=0.01)

    def test_history_dependent_strategy(self, two_bernoulli):
        strategy = LastValueStrategy(first=0, on_value={0.0: 1, 1.0: 0})
        stats = PathSimulator(two_bernoulli, strategy, seed=0).run(0, 200, [200])
        assert stats.checkpoints == (200,)
        assert 0.0 <= stats.running_means[0] <= 1.0

    def test_independent_model_alternates_driver_sets(self):
        model = fixtures.independent_bounded()
        drivers = simulate_driver_paths(model, ConstantStrategy(0), 40, 3, seed=0)
        assert drivers.shape == (3, 40)
        assert set(np.unique(drivers[:, 0::2])) <= {0.0, 1.0}
        assert set(np.unique(drivers[:, 1::2])) <= {-1.0, 0.0, 1.0}

    def test_rows(self, two_bernoulli):
        stats = simulate_paths(two_bernoulli, ConstantStrategy(0), 100, 1, [10, 100], seed=0)[0]
        rows = stats.rows()
        assert [r["n"] for r in rows] == [10, 100]
        assert set(rows[0]) == {"path", "strategy", "n", "sum", "running_mean", "running_sup", "running_max_dev"}
