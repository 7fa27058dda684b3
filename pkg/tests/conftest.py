import numpy as np
import pytest

from netcpd import ModelConfig, sample_memberships, simulate
from netcpd.simulate import batch_stream

TWO_GROUP_RATES = np.array([[2.0, 1.0], [0.3, 8.0]])


@pytest.fixture
def small_sim():
    """60-node two-group stream, no changes, horizon 3."""
    labels = sample_memberships(60, [0.6, 0.4], seed=11)
    out = simulate(60, TWO_GROUP_RATES, labels, horizon=3.0, seed=5)
    return out, labels


def make_batches(out, delta=0.1, horizon=3.0):
    return batch_stream(out, delta, horizon)


def two_group_config(n_nodes, forgetting=0.1, **kwargs):
    base = dict(n_nodes=n_nodes, n_groups=2, delta=0.1,
                delta_lambda=forgetting, delta_z=forgetting,
                delta_pi=forgetting)
    base.update(kwargs)
    return ModelConfig(**base)
