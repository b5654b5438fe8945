"""Deterministic reductions for ensemble summaries.

``math.fsum`` returns the correctly rounded sum, which is independent of
accumulation order and therefore of any parallel schedule; it is at least as
accurate as the compensated ascending-order sum used in the interaction
kernels.
"""

from __future__ import annotations

import math

import numpy as np


def ordered_sum(values) -> float:
    """Exactly rounded sum of a 1-D array."""
    return math.fsum(np.asarray(values, dtype=np.float64).tolist())


def ensemble_mean(states: np.ndarray) -> np.ndarray:
    """Per-coordinate mean of an (N, d) state array."""
    n = states.shape[0]
    return np.array([ordered_sum(states[:, k]) / n for k in range(states.shape[1])])


def ensemble_cov(states: np.ndarray, mean: np.ndarray | None = None) -> np.ndarray:
    """Population covariance (weights 1/N) of an (N, d) state array."""
    n, d = states.shape
    if mean is None:
        mean = ensemble_mean(states)
    centered = states - mean
    cov = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            cov[i, j] = cov[j, i] = ordered_sum(centered[:, i] * centered[:, j]) / n
    return cov

def ensemble_second_moment(states: np.ndarray) -> float:
    """Mean squared Euclidean norm over particles."""
    sq = np.einsum("nk,nk->n", states, states)
    return ordered_sum(sq) / states.shape[0]
