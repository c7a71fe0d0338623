"""Discrete belief filtering over the latent environment state.

Posterior over states proportional to observation likelihood times the
transition-propagated prior, renormalized.  An impossible observation
(zero total likelihood) is reported with a warning and the belief falls
back to the transition-propagated predictive.
"""

from __future__ import annotations

import warnings

import numpy as np


class BeliefError(ValueError):
    pass


class ImpossibleObservationWarning(UserWarning):
    pass


def _as_distribution(v, what: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise BeliefError(f"{what}: expected a vector, got shape {arr.shape}")
    if np.any(arr < -1e-15):
        raise BeliefError(f"{what}: negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > 1e-9:
        raise BeliefError(f"{what}: sums to {total}, not 1")
    return np.clip(arr, 0.0, None)


def _model_for(model, action):
    try:
        return np.asarray(model[action], dtype=float)
    except (KeyError, IndexError, TypeError):
        raise BeliefError(f"model has no entry for action {action!r}")


def update_belief(prior, action, observation, transition_model,
                  observation_model) -> np.ndarray:
    """One filtering step.

    transition_model[action] is a row-stochastic (n x n) matrix over states;
    observation_model[action] is an (n x m) likelihood table indexed by
    state then observation.
    """
    b = _as_distribution(prior, "prior belief")
    trans = _model_for(transition_model, action)
    if trans.shape != (b.size, b.size):
        raise BeliefError(f"transition matrix shape {trans.shape} does not "
                          f"match {b.size} states")
    rows = trans.sum(axis=1)
    if np.any(np.abs(rows - 1.0) > 1e-9):
        raise BeliefError("transition matrix rows must sum to 1")
    obs_table = _model_for(observation_model, action)
    if obs_table.shape[0] != b.size:
        raise BeliefError(f"observation table has {obs_table.shape[0]} rows "
                          f"for {b.size} states")
    if not 0 <= observation < obs_table.shape[1]:
        raise BeliefError(f"observation index {observation} out of range")

    predictive = b @ trans
    likelihood = obs_table[:, observation]
    unnormalized = likelihood * predictive
    total = float(unnormalized.sum())
    if total <= 0.0:
        warnings.warn("observation has zero likelihood under the prior; "
                      "falling back to the predictive distribution",
                      ImpossibleObservationWarning)
        ptot = float(predictive.sum())
        return predictive / ptot if ptot > 0 else predictive
    return unnormalized / total
