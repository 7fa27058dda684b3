"""Ground-truth simulator for block-homogeneous Poisson streams.

Each edge carries a piecewise-homogeneous Poisson process whose rate is
looked up from the current block rate matrix and the endpoints' current
group labels.  Scheduled rate jumps and membership moves cut every edge's
rate path into constant segments, which are sampled independently.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import EventBatch


class ScheduleError(ValueError):
    """A change schedule is inconsistent with the simulation horizon."""


@dataclass
class RateChange:
    time: float
    block: tuple[int, int]
    new_rate: float


@dataclass
class MembershipChange:
    """Move of ``nodes`` to ``target_group`` at ``time``.

    Covers swaps, merges (all nodes of a group listed) and creations
    (a subset moved to a previously empty label).
    """

    time: float
    nodes: np.ndarray
    target_group: int

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.int64)


@dataclass
class ChangeSchedule:
    rate_changes: list[RateChange] = field(default_factory=list)
    membership_changes: list[MembershipChange] = field(default_factory=list)

    def change_times(self) -> list[float]:
        times = {c.time for c in self.rate_changes}
        times |= {c.time for c in self.membership_changes}
        return sorted(times)

    def validate(self, horizon: float, n_groups: int, n_nodes: int) -> None:
        for c in self.rate_changes:
            if not 0.0 < c.time < horizon:
                raise ScheduleError(f"rate change at t={c.time} outside (0, {horizon})")
            if not c.new_rate > 0:
                raise ScheduleError("new rates must be > 0")
            k, m = c.block
            if not (0 <= k < n_groups and 0 <= m < n_groups):
                raise ScheduleError(f"block {c.block} outside label range")
        for c in self.membership_changes:
            if not 0.0 < c.time < horizon:
                raise ScheduleError(f"membership change at t={c.time} outside (0, {horizon})")
            if not 0 <= c.target_group < n_groups:
                raise ScheduleError(f"target group {c.target_group} outside label range")
            if np.any(c.nodes < 0) or np.any(c.nodes >= n_nodes):
                raise ScheduleError("node ids outside range")


class StepFunction:
    """Right-continuous step function of time, defined by breakpoints."""

    def __init__(self, times: list[float], values: list):
        if not times or times[0] != 0.0:
            raise ValueError("step function must start at t=0")
        self.times = np.asarray(times, dtype=np.float64)
        self.values = values

    def at(self, t: float):
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.values[max(idx, 0)]


@dataclass
class SimOutput:
    src: np.ndarray
    dst: np.ndarray
    times: np.ndarray
    true_memberships: StepFunction
    true_rates: StepFunction
    adjacency: np.ndarray

    @property
    def n_events(self) -> int:
        return self.times.size


def sample_memberships(n_nodes: int, proportions: np.ndarray,
                       seed: int | np.random.Generator = 0) -> np.ndarray:
    """Draw i.i.d. categorical group labels for ``n_nodes`` nodes."""
    proportions = np.asarray(proportions, dtype=np.float64)
    if abs(proportions.sum() - 1.0) > 1e-9 or np.any(proportions < 0):
        raise ValueError("proportions must lie on the simplex")
    rng = np.random.default_rng(seed)
    return rng.choice(proportions.size, size=n_nodes, p=proportions)


def sample_sbm_adjacency(memberships: np.ndarray, rho: np.ndarray,
                         seed: int | np.random.Generator = 0,
                         self_loops: bool = True) -> np.ndarray:
    """Sample a directed SBM adjacency with edge probabilities ``rho``."""
    rho = np.atleast_2d(np.asarray(rho, dtype=np.float64))
    if rho.size == 1:
        k = int(np.max(memberships)) + 1
        rho = np.full((k, k), float(rho.flat[0]))
    if np.any(rho < 0) or np.any(rho > 1):
        raise ValueError("rho entries must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    probs = rho[np.ix_(memberships, memberships)]
    adj = (rng.random(probs.shape) < probs).astype(np.int8)
    if not self_loops:
        np.fill_diagonal(adj, 0)
    return adj


def simulate(n_nodes: int, rates: np.ndarray, memberships: np.ndarray,
             horizon: float, seed: int | np.random.Generator = 0,
             schedule: ChangeSchedule | None = None,
             adjacency: np.ndarray | None = None,
             self_loops: bool = True) -> SimOutput:
    """Simulate the event stream on [0, horizon].

    ``memberships`` and ``rates`` give the state at t=0; ``schedule``
    scripts later jumps.  ``adjacency`` defaults to the complete graph
    (including self-loops unless ``self_loops`` is False).
    """
    rates = np.asarray(rates, dtype=np.float64)
    n_groups = rates.shape[0]
    memberships = np.asarray(memberships, dtype=np.int64).copy()
    schedule = schedule or ChangeSchedule()
    schedule.validate(horizon, n_groups, n_nodes)
    if adjacency is None:
        adjacency = np.ones((n_nodes, n_nodes), dtype=np.int8)
        if not self_loops:
            np.fill_diagonal(adjacency, 0)
    adjacency = np.asarray(adjacency)
    rng = np.random.default_rng(seed)

    rate_by_time = {t: [c for c in schedule.rate_changes if c.time == t]
                    for t in schedule.change_times()}
    memb_by_time = {t: [c for c in schedule.membership_changes if c.time == t]
                    for t in schedule.change_times()}

    memb_times, memb_values = [0.0], [memberships.copy()]
    rate_times, rate_values = [0.0], [rates.copy()]

    cuts = [0.0] + schedule.change_times() + [horizon]
    srcs, dsts, times = [], [], []
    current_rates = rates.copy()
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b > a:
            lam = current_rates[np.ix_(memberships, memberships)] * adjacency
            counts = rng.poisson(lam * (b - a))
            i_idx, j_idx = np.nonzero(counts)
            reps = counts[i_idx, j_idx]
            total = int(reps.sum())
            if total:
                srcs.append(np.repeat(i_idx, reps))
                dsts.append(np.repeat(j_idx, reps))
                times.append(rng.uniform(a, b, total))
        if b < horizon:
            for c in rate_by_time.get(b, []):
                current_rates = current_rates.copy()
                current_rates[c.block] = c.new_rate
                rate_times.append(b)
                rate_values.append(current_rates.copy())
            for c in memb_by_time.get(b, []):
                memberships = memberships.copy()
                memberships[c.nodes] = c.target_group
                memb_times.append(b)
                memb_values.append(memberships.copy())

    if srcs:
        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        t = np.concatenate(times)
        order = np.argsort(t, kind="stable")
        src, dst, t = src[order], dst[order], t[order]
    else:
        src = dst = np.empty(0, dtype=np.int64)
        t = np.empty(0, dtype=np.float64)

    return SimOutput(src, dst, t,
                     StepFunction(memb_times, memb_values),
                     StepFunction(rate_times, rate_values),
                     np.asarray(adjacency))


def batch_events(src: np.ndarray, dst: np.ndarray, times: np.ndarray,
                 n_nodes: int, delta: float, horizon: float) -> list[EventBatch]:
    """Aggregate a time-sorted event stream into batches of width ``delta``.

    Batch r (1-based) holds events with t in ((r-1)*delta, r*delta].
    """
    n_batches = int(round(horizon / delta))
    if abs(n_batches * delta - horizon) > 1e-9 * max(horizon, 1.0):
        n_batches = int(np.ceil(horizon / delta - 1e-12))
    edges = delta * np.arange(1, n_batches + 1)
    if times.size and (times.min() <= 0 or times.max() > edges[-1] + 1e-12):
        raise ValueError("event timestamp outside (0, horizon]")
    batch_idx = np.searchsorted(edges, times, side="left")
    batch_idx = np.minimum(batch_idx, n_batches - 1)
    flat = batch_idx * n_nodes * n_nodes + src * n_nodes + dst
    counts = np.bincount(flat, minlength=n_batches * n_nodes * n_nodes)
    counts = counts.reshape(n_batches, n_nodes, n_nodes)
    return [EventBatch(counts[r], r + 1, delta) for r in range(n_batches)]


def batch_stream(output: SimOutput, delta: float, horizon: float) -> list[EventBatch]:
    n_nodes = output.adjacency.shape[0]
    return batch_events(output.src, output.dst, output.times, n_nodes, delta, horizon)


def sinusoidal_schedule(rate_fn, horizon: float, delta: float,
                        n_groups: int) -> tuple[np.ndarray, ChangeSchedule]:
    """Approximate continuously varying rates with fine constant segments.

    ``rate_fn(t)`` returns a K x K matrix; segments have width delta / 10,
    so the approximation error is O(segment width).
    """
    seg = delta / 10.0
    t_grid = np.arange(0.0, horizon, seg)
    initial = np.asarray(rate_fn(0.0), dtype=np.float64)
    changes = []
    prev = initial
    for t in t_grid[1:]:
        cur = np.asarray(rate_fn(t), dtype=np.float64)
        for k in range(n_groups):
            for m in range(n_groups):
                if cur[k, m] != prev[k, m]:
                    changes.append(RateChange(float(t), (k, m), float(cur[k, m])))
        prev = cur
    return initial, ChangeSchedule(rate_changes=changes)
