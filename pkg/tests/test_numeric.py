import math

import numpy as np
import pytest

from doctree.utils.numeric import normalize_log_weights, pick_index, sample_categorical, step_log_weight


def test_step_weight():
    assert step_log_weight(0.5, 4) == pytest.approx(math.log(0.125))


def test_normalize_rejects_empty_and_dead_weights():
    with pytest.raises(ValueError):
        normalize_log_weights(np.zeros(0))
    with pytest.raises(ValueError):
        normalize_log_weights(np.full(3, -np.inf))


@pytest.mark.parametrize(
    "u, expected",
    [(0.0, 0), (0.1, 0), (0.25, 1), (0.65, 1), (0.75, 2), (0.999, 2)],
)
def test_pick_index_walks_the_cumulative_sum(u, expected):
    assert pick_index([0.2, 0.5, 0.3], u) == expected


def test_pick_index_skips_zero_mass():
    assert pick_index([0.0, 1.0, 0.0], 0.0) == 1
    assert pick_index([0.5, 0.5, 0.0], 0.9999999) == 1


def test_sample_categorical_matches_searchsorted():
    rng = np.random.default_rng(3)
    for _ in range(200):
        probabilities = rng.dirichlet(np.ones(int(rng.integers(1, 8))))
        seed = int(rng.integers(1 << 30))
        u = np.random.default_rng(seed).random()
        cumulative = np.cumsum(probabilities)
        expected = min(int(np.searchsorted(cumulative, u * cumulative[-1], side="right")), cumulative.size - 1)
        assert sample_categorical(probabilities, np.random.default_rng(seed)) == expected
