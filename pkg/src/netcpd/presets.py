"""Built-in experiment presets.

Each preset bundles a network size, group structure, base rate matrix,
and a change schedule, along with the engine/detector settings used for
that scenario.  Presets are the canonical scenarios exercised by the
CLI and the evaluation suite; every knob can be overridden.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .detect import DetectorConfig
from .model import ModelConfig
from .simulate import (ChangeSchedule, MembershipChange, RateChange,
                       SimOutput, sample_memberships, sample_sbm_adjacency,
                       simulate, sinusoidal_schedule)

BASE_RATES = np.array([[2.0, 1.0], [0.3, 8.0]])
BASE_PROPORTIONS = np.array([0.6, 0.4])


@dataclass
class Preset:
    name: str
    n_nodes: int
    n_groups: int
    proportions: np.ndarray
    rates: np.ndarray
    horizon: float
    delta: float = 0.1
    forgetting: float = 0.1
    variant: str = "bhpp"
    sbm_rho: float | None = None
    truncation: int | None = None
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    # schedule builders may depend on the sampled memberships / rng
    _schedule_fn: object = None

    def model_config(self, **overrides) -> ModelConfig:
        kwargs = dict(
            n_nodes=self.n_nodes,
            n_groups=(self.truncation if self.variant == "gem"
                      else self.n_groups),
            delta=self.delta,
            delta_lambda=self.forgetting,
            delta_z=self.forgetting,
            delta_pi=self.forgetting,
            delta_u=self.forgetting,
        )
        if self.variant == "gem":
            # stick-breaking inference needs undamped membership/stick
            # accumulation and extra cycles, or surplus groups never drain
            kwargs.update(truncation=self.truncation, delta_z=1.0,
                          delta_pi=1.0, delta_u=1.0, n_cavi=20)
        kwargs.update(overrides)
        return ModelConfig(**kwargs)

    def build(self, seed: int) -> SimOutput:
        """Sample memberships (and adjacency if sparse) and simulate."""
        rng = np.random.default_rng(seed)
        memberships = sample_memberships(
            self.n_nodes, self.proportions, rng.integers(1 << 31))
        adjacency = None
        if self.sbm_rho is not None:
            adjacency = sample_sbm_adjacency(
                memberships, self.sbm_rho, rng.integers(1 << 31))
        schedule = None
        if self._schedule_fn is not None:
            schedule = self._schedule_fn(self, memberships, rng)
        return simulate(
            n_nodes=self.n_nodes,
            rates=self.rates,
            memberships=memberships,
            horizon=self.horizon,
            seed=rng.integers(1 << 31),
            schedule=schedule,
            adjacency=adjacency,
        )

    def with_overrides(self, **kwargs) -> "Preset":
        return replace(self, **kwargs)


def _fig3_schedule(preset, memberships, rng):
    return ChangeSchedule(rate_changes=[RateChange(3.0, (0, 0), 5.0)])


def _swap_schedule(fraction):
    def build(preset, memberships, rng):
        # move `fraction` of group-0 nodes into group 1 at t=3
        group0 = np.flatnonzero(memberships == 0)
        n_move = max(1, int(round(fraction * len(group0))))
        moved = rng.choice(group0, size=n_move, replace=False)
        return ChangeSchedule(membership_changes=[
            MembershipChange(3.0, moved, 1)])
    return build


def _merge_schedule(preset, memberships, rng):
    # all of group 1 joins group 0 at t=3: the network merges to one group
    group1 = np.flatnonzero(memberships == 1)
    return ChangeSchedule(membership_changes=[MembershipChange(3.0, group1, 0)])


def _create_schedule(preset, memberships, rng):
    # a third group appears at t=3, drawn evenly from both existing groups
    n_new = preset.n_nodes // 3
    moved = rng.choice(preset.n_nodes, size=n_new, replace=False)
    return ChangeSchedule(membership_changes=[MembershipChange(3.0, moved, 2)])


def _rate_gap_schedule(gap_steps):
    def build(preset, memberships, rng):
        t1 = 3.0
        t2 = 3.0 + preset.delta * gap_steps
        return ChangeSchedule(rate_changes=[
            RateChange(t1, (0, 0), 5.0),
            RateChange(t2, (0, 0), 3.0)])
    return build


def _sinusoidal_schedule(preset, memberships, rng):
    def rate_fn(t):
        rates = preset.rates.copy()
        rates[0, 0] = 2.0 + np.sin(2.0 * np.pi * t / 2.0)
        return rates
    _, schedule = sinusoidal_schedule(rate_fn, preset.horizon, preset.delta,
                                      preset.n_groups)
    return schedule


def get_preset(name: str, *, n_nodes: int | None = None,
               fraction: float = 0.1, gap_steps: int = 10,
               rho: float = 0.25, **overrides) -> Preset:
    """Look up a preset by name.

    Names: fig3, swap, merge, create, rate-gap, sparsity, sinusoidal.
    ``fraction`` applies to swap, ``gap_steps`` to rate-gap, ``rho`` to
    sparsity.
    """
    common = dict(
        n_groups=2,
        proportions=BASE_PROPORTIONS,
        rates=BASE_RATES.copy(),
        horizon=6.0,
    )
    if name == "fig3":
        preset = Preset(name=name, n_nodes=500, _schedule_fn=_fig3_schedule,
                        **common)
    elif name == "swap":
        preset = Preset(name=name, n_nodes=500,
                        _schedule_fn=_swap_schedule(fraction), **common)
    elif name == "merge":
        preset = Preset(name=name, n_nodes=500, variant="gem", truncation=6,
                        _schedule_fn=_merge_schedule, **common)
    elif name == "create":
        rates = np.array([[2.0, 1.0, 0.5], [0.3, 8.0, 0.5], [0.5, 0.5, 4.0]])
        preset = Preset(name=name, n_nodes=500, n_groups=3,
                        proportions=np.array([0.6, 0.4, 0.0]),
                        rates=rates, horizon=6.0, variant="gem",
                        truncation=6, _schedule_fn=_create_schedule)
    elif name == "rate-gap":
        preset = Preset(name=name, n_nodes=200,
                        _schedule_fn=_rate_gap_schedule(gap_steps),
                        detector=DetectorConfig(reset_on_flag=False),
                        **common)
    elif name == "sparsity":
        preset = Preset(name=name, n_nodes=200, variant="sbm", sbm_rho=rho,
                        _schedule_fn=_fig3_schedule, **common)
    elif name == "sinusoidal":
        preset = Preset(name=name, n_nodes=200,
                        _schedule_fn=_sinusoidal_schedule, **common)
    else:
        raise KeyError(f"unknown preset {name!r}")
    if n_nodes is not None:
        preset = preset.with_overrides(n_nodes=n_nodes)
    if overrides:
        preset = preset.with_overrides(**overrides)
    return preset


PRESET_NAMES = ("fig3", "swap", "merge", "create", "rate-gap", "sparsity",
                "sinusoidal")
