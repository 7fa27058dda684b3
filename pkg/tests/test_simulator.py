import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netcpd import (ChangeSchedule, MembershipChange, RateChange,
                    ScheduleError, batch_events, sample_memberships,
                    sample_sbm_adjacency, simulate, sinusoidal_schedule)
from netcpd.simulate import batch_stream


def test_deterministic_given_seed():
    labels = np.zeros(10, dtype=int)
    a = simulate(10, [[3.0]], labels, horizon=2.0, seed=42)
    b = simulate(10, [[3.0]], labels, horizon=2.0, seed=42)
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.src, b.src)
    c = simulate(10, [[3.0]], labels, horizon=2.0, seed=43)
    assert not np.array_equal(a.times, c.times)


def test_event_count_moments():
    # 10 nodes, complete graph with self-loops: 100 edges at rate 3 over T=2
    labels = np.zeros(10, dtype=int)
    totals = [simulate(10, [[3.0]], labels, horizon=2.0, seed=s).times.size
              for s in range(30)]
    expected = 100 * 3.0 * 2.0
    assert abs(np.mean(totals) - expected) < 4 * np.sqrt(expected / 30)


def test_no_self_loops_flag():
    labels = np.zeros(5, dtype=int)
    out = simulate(5, [[2.0]], labels, horizon=2.0, seed=0, self_loops=False)
    assert not np.any(out.src == out.dst)


def test_count_preservation_through_batching(small_sim):
    out, _ = small_sim
    batches = batch_stream(out, 0.1, 3.0)
    assert len(batches) == 30
    assert sum(b.counts.sum() for b in batches) == out.times.size


def test_batch_boundaries_are_right_closed():
    src = np.array([0, 0, 1])
    dst = np.array([1, 1, 0])
    times = np.array([0.1, 0.1000000001, 0.2])
    batches = batch_events(src, dst, times, 2, 0.1, 0.4)
    assert batches[0].counts[0, 1] == 1      # t = delta lands in batch 1
    assert batches[1].counts[0, 1] == 1
    assert batches[1].counts[1, 0] == 1
    assert all(b.width == 0.1 for b in batches)


def test_batch_rejects_out_of_range_times():
    with pytest.raises(ValueError):
        batch_events(np.array([0]), np.array([1]), np.array([0.0]), 2, 0.1, 1.0)
    with pytest.raises(ValueError):
        batch_events(np.array([0]), np.array([1]), np.array([1.5]), 2, 0.1, 1.0)


def test_schedule_validation():
    labels = np.zeros(5, dtype=int)
    bad_time = ChangeSchedule(rate_changes=[RateChange(9.0, (0, 0), 1.0)])
    with pytest.raises(ScheduleError):
        simulate(5, [[2.0]], labels, horizon=2.0, schedule=bad_time)
    bad_block = ChangeSchedule(rate_changes=[RateChange(1.0, (0, 3), 1.0)])
    with pytest.raises(ScheduleError):
        simulate(5, [[2.0]], labels, horizon=2.0, schedule=bad_block)
    bad_node = ChangeSchedule(membership_changes=[
        MembershipChange(1.0, [7], 0)])
    with pytest.raises(ScheduleError):
        simulate(5, [[2.0]], labels, horizon=2.0, schedule=bad_node)


def test_rate_change_shifts_counts():
    labels = np.zeros(20, dtype=int)
    schedule = ChangeSchedule(rate_changes=[RateChange(1.0, (0, 0), 10.0)])
    out = simulate(20, [[1.0]], labels, horizon=2.0, seed=1, schedule=schedule)
    pre = np.sum(out.times <= 1.0)
    post = np.sum(out.times > 1.0)
    assert post > 5 * pre
    np.testing.assert_array_equal(out.true_rates.at(0.5), [[1.0]])
    np.testing.assert_array_equal(out.true_rates.at(1.5), [[10.0]])


def test_membership_change_recorded():
    labels = np.zeros(6, dtype=int)
    schedule = ChangeSchedule(membership_changes=[
        MembershipChange(1.0, [0, 1], 1)])
    out = simulate(6, [[1.0, 1.0], [1.0, 1.0]], labels, horizon=2.0,
                   schedule=schedule)
    assert out.true_memberships.at(0.5).tolist() == [0] * 6
    assert out.true_memberships.at(1.0).tolist() == [1, 1, 0, 0, 0, 0]


def test_sbm_adjacency_density():
    labels = sample_memberships(300, [0.5, 0.5], seed=0)
    adj = sample_sbm_adjacency(labels, 0.2, seed=1)
    assert abs(adj.mean() - 0.2) < 0.02
    full = sample_sbm_adjacency(labels, 1.0, seed=1)
    assert full.min() == 1


def test_sinusoidal_schedule_segments():
    def rate_fn(t):
        return np.array([[2.0 + np.sin(t)]])

    rates0, schedule = sinusoidal_schedule(rate_fn, 1.0, 0.1, 1)
    times = schedule.change_times()
    assert len(times) == 99                      # horizon / (delta/10) - 1
    assert np.allclose(np.diff(times), 0.01)
    np.testing.assert_allclose(rates0, [[2.0]])


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=200), st.integers(0, 2 ** 31 - 1))
def test_batching_is_lossless(n_events, seed):
    rng = np.random.default_rng(seed)
    horizon, delta, n = 2.0, 0.25, 4
    times = np.sort(rng.uniform(1e-9, horizon, n_events))
    src = rng.integers(0, n, n_events)
    dst = rng.integers(0, n, n_events)
    batches = batch_events(src, dst, times, n, delta, horizon)
    assert len(batches) == 8
    assert sum(b.counts.sum() for b in batches) == n_events
