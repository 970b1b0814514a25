"""Log-space helpers shared by the serial and the parallel samplers."""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from doctree.common import get_logger

logger = get_logger("utils.numeric")


def step_log_weight(gamma: float, degree: int) -> float:
    """Log probability of the walker continuing to one of ``degree`` children."""
    return math.log((1.0 - gamma) / degree)


def normalize_log_weights(log_weights: np.ndarray) -> np.ndarray:
    """Turn unnormalized log weights into probabilities with the log-sum-exp trick.

    Args:
        log_weights: 1-d array of unnormalized log weights.

    Returns:
        np.ndarray: Probabilities summing to one.

    Raises:
        ValueError: If the input is empty or carries no finite mass.
    """
    log_weights = np.asarray(log_weights, dtype=float)
    if log_weights.ndim != 1 or log_weights.size == 0:
        raise ValueError("log weights must be a non-empty 1-d vector")

    denominator = logsumexp(log_weights)
    if not np.isfinite(denominator):
        logger.error("Total probability is not valid: %s", log_weights)
        raise ValueError("Invalid log weights: no finite probability mass.")

    return np.exp(log_weights - denominator)


def pick_index(probabilities: Sequence[float], u: float) -> int:
    """Index of the first cumulative probability above ``u`` times the total."""
    cumulative = list(itertools.accumulate(probabilities))
    target = u * cumulative[-1]
    for index, value in enumerate(cumulative):
        if value > target:
            return index
    # u == total can only happen through rounding
    return len(probabilities) - 1


def sample_categorical(probabilities: np.ndarray, rng: np.random.Generator) -> int:
    """Draw one index from a normalized discrete distribution."""
    return pick_index(np.asarray(probabilities, dtype=float).tolist(), rng.random())
