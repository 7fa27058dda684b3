import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netcpd import (ConfigError, EventBatch, MembershipPosterior,
                    MixturePosterior, ModelConfig, RatePosterior,
                    stick_to_proportions, validate)


@pytest.mark.parametrize("field,value", [
    ("n_nodes", 1),
    ("n_groups", 0),
    ("delta", 0.0),
    ("delta_lambda", 0.0),
    ("delta_lambda", 1.2),
    ("delta_z", -0.1),
    ("n_cavi", 0),
    ("alpha0", -1.0),
    ("beta0", 0.0),
    ("epsilon_occupancy", 0.0),
    ("gem_concentration", -2.0),
])
def test_validate_rejects_bad_field(field, value):
    config = ModelConfig(n_nodes=10, n_groups=2).replace(**{field: value})
    with pytest.raises(ConfigError, match=field.split("0")[0]):
        validate(config)


def test_validate_accepts_defaults():
    config = ModelConfig(n_nodes=10, n_groups=2)
    assert validate(config) is config


def test_validate_checks_prior_shapes():
    config = ModelConfig(n_nodes=10, n_groups=2, alpha0=np.ones((3, 3)))
    with pytest.raises(ConfigError):
        validate(config)
    config = ModelConfig(n_nodes=10, n_groups=2, gamma0=np.array([1.0, -1.0]))
    with pytest.raises(ConfigError):
        validate(config)


def test_event_batch_rejects_bad_counts():
    with pytest.raises(ValueError):
        EventBatch(np.zeros((2, 3)), 1, 0.1)
    with pytest.raises(ValueError):
        EventBatch(-np.ones((2, 2)), 1, 0.1)
    batch = EventBatch(np.arange(4).reshape(2, 2), 1, 0.1)
    assert batch.n_nodes == 2


def test_rate_posterior_mean_and_check():
    post = RatePosterior(np.array([[4.0]]), np.array([[2.0]]))
    assert post.mean[0, 0] == 2.0
    post.check()
    with pytest.raises(ValueError):
        RatePosterior(np.array([[0.0]]), np.array([[1.0]])).check()


def test_membership_posterior_row_sums():
    MembershipPosterior(np.array([[0.5, 0.5]])).check()
    with pytest.raises(ValueError):
        MembershipPosterior(np.array([[0.6, 0.5]])).check()
    with pytest.raises(ValueError):
        MembershipPosterior(np.array([[1.2, -0.2]])).check()
    assert MembershipPosterior(np.array([[0.3, 0.7]])).labels.tolist() == [1]


def test_mixture_proportions():
    mix = MixturePosterior(np.array([3.0, 1.0]))
    np.testing.assert_allclose(mix.proportions, [0.75, 0.25])


def test_stick_to_proportions_hand_case():
    # u=(0.3, 0.6, 1): pi = (0.3, 0.7*0.6, 0.7*0.4)
    pi = stick_to_proportions(np.array([0.3, 0.6, 1.0]))
    np.testing.assert_allclose(pi, [0.3, 0.42, 0.28], atol=1e-15)


def test_stick_to_proportions_validates():
    with pytest.raises(ValueError):
        stick_to_proportions(np.array([0.3, 0.5]))   # last != 1
    with pytest.raises(ValueError):
        stick_to_proportions(np.array([1.2, 1.0]))


@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=0,
                max_size=8))
def test_stick_to_proportions_on_simplex(draws):
    u = np.array(draws + [1.0])
    pi = stick_to_proportions(u)
    assert np.all(pi >= 0)
    assert abs(pi.sum() - 1.0) < 1e-12
