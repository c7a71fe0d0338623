"""Belief filter tests."""

import numpy as np
import pytest

from plnnsim.belief import BeliefError, ImpossibleObservationWarning, update_belief


def two_state_models(stay=0.9, like=(0.8, 0.2)):
    transition = {0: np.array([[stay, 1 - stay], [1 - stay, stay]])}
    observation = {0: np.array([[like[0], 1 - like[0]],
                                [like[1], 1 - like[1]]])}
    return transition, observation


def test_identity_transition_perfect_observation_gives_point_mass():
    transition = {0: np.eye(3)}
    observation = {0: np.eye(3)}
    post = update_belief([1 / 3, 1 / 3, 1 / 3], 0, 2, transition, observation)
    assert post == pytest.approx([0, 0, 1])


def test_uninformative_observation_returns_predictive():
    transition = {0: np.array([[0.7, 0.3], [0.2, 0.8]])}
    observation = {0: np.full((2, 2), 0.5)}
    prior = [0.6, 0.4]
    post = update_belief(prior, 0, 0, transition, observation)
    predictive = np.array(prior) @ transition[0]
    assert post == pytest.approx(predictive)


def test_two_state_hand_computed_example():
    # symmetric transition keeps the uniform prior uniform, so the posterior
    # is the normalized likelihood (0.8, 0.2)
    transition, observation = two_state_models()
    post = update_belief([0.5, 0.5], 0, 0, transition, observation)
    assert post[0] == pytest.approx(0.8, abs=1e-12)
    assert post[1] == pytest.approx(0.2, abs=1e-12)


def test_normalization_property_random_cases():
    rng = np.random.default_rng(123)
    for _ in range(400):
        n = rng.integers(2, 6)
        m = rng.integers(2, 5)
        prior = rng.random(n)
        prior /= prior.sum()
        trans = rng.random((n, n)) + 1e-3
        trans /= trans.sum(axis=1, keepdims=True)
        obs_table = rng.random((n, m)) + 1e-6
        post = update_belief(prior, 0, int(rng.integers(0, m)),
                             {0: trans}, {0: obs_table})
        assert abs(post.sum() - 1.0) <= 1e-12
        assert np.all(post >= 0)


def test_zero_likelihood_warns_and_returns_predictive():
    transition = {0: np.array([[1.0, 0.0], [0.0, 1.0]])}
    observation = {0: np.array([[1.0, 0.0], [1.0, 0.0]])}   # obs 1 impossible
    with pytest.warns(ImpossibleObservationWarning):
        post = update_belief([0.3, 0.7], 0, 1, transition, observation)
    assert post == pytest.approx([0.3, 0.7])


def test_model_validation_errors():
    transition, observation = two_state_models()
    with pytest.raises(BeliefError, match="sums to"):
        update_belief([0.5, 0.6], 0, 0, transition, observation)
    with pytest.raises(BeliefError, match="rows must sum"):
        update_belief([0.5, 0.5], 0, 0,
                      {0: np.array([[0.5, 0.1], [0.2, 0.8]])}, observation)
    with pytest.raises(BeliefError, match="no entry"):
        update_belief([0.5, 0.5], 9, 0, transition, observation)
    with pytest.raises(BeliefError, match="out of range"):
        update_belief([0.5, 0.5], 0, 5, transition, observation)
