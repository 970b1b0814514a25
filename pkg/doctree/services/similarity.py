"""Graph similarity from fast-belief-propagation node affinities (DeltaCon style)."""

from __future__ import annotations

import math
from typing import Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from doctree.common import get_logger

logger = get_logger("services.similarity")

Edge = Tuple[Hashable, Hashable]


def _adjacency(edges: Iterable[Edge], index: dict) -> sparse.csr_matrix:
    """Undirected 0/1 adjacency without self loops."""
    pairs = {
        (index[source], index[target])
        for source, target in edges
        if source != target
    }
    pairs |= {(target, source) for source, target in pairs}
    size = len(index)
    if not pairs:
        return sparse.csr_matrix((size, size))
    rows, cols = zip(*sorted(pairs))
    return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size))


def shared_epsilon(*adjacencies: sparse.csr_matrix) -> float:
    """1 / (1 + largest degree over all the graphs)."""
    largest = max((float(matrix.sum(axis=1).max()) if matrix.nnz else 0.0) for matrix in adjacencies)
    return 1.0 / (1.0 + largest)


def affinity(adjacency: sparse.csr_matrix, epsilon: float, groups: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
    """Columns of ``(I + eps^2 D - eps A)^-1`` for each seed group.

    Without ``groups`` every node is its own group and the full inverse is
    returned.
    """
    size = adjacency.shape[0]
    degrees = np.asarray(adjacency.sum(axis=1)).ravel()
    system = sparse.csc_matrix(
        sparse.identity(size) + epsilon**2 * sparse.diags(degrees) - epsilon * adjacency
    )
    if groups is None:
        seeds = np.identity(size)
    else:
        seeds = np.zeros((size, len(groups)))
        for column, members in enumerate(groups):
            seeds[np.asarray(members, dtype=int), column] = 1.0
    solution = spsolve(system, seeds)
    return np.asarray(solution).reshape(size, -1)


def random_groups(size: int, count: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Split node indices into ``count`` random groups of near-equal size."""
    if not 1 <= count <= size:
        raise ValueError(f"group count must lie in 1..{size}, got {count}")
    return [np.sort(part) for part in np.array_split(rng.permutation(size), count)]


def root_euclidean(first: np.ndarray, second: np.ndarray) -> float:
    """Matusita distance between two non-negative affinity matrices."""
    delta = np.sqrt(np.clip(first, 0.0, None)) - np.sqrt(np.clip(second, 0.0, None))
    return float(math.sqrt(np.sum(delta * delta)))


def graph_similarity(
    edges_a: Iterable[Edge],
    edges_b: Iterable[Edge],
    nodes: Iterable[Hashable] = (),
    *,
    groups: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Similarity in (0, 1] of two graphs over the union of their nodes.

    Raises:
        ValueError: If the union of nodes is empty.
    """
    edges_a = list(edges_a)
    edges_b = list(edges_b)
    labels = set(nodes)
    for source, target in edges_a + edges_b:
        labels.update((source, target))
    if not labels:
        raise ValueError("both graphs are empty")

    index = {label: position for position, label in enumerate(sorted(labels, key=repr))}
    first = _adjacency(edges_a, index)
    second = _adjacency(edges_b, index)
    epsilon = shared_epsilon(first, second)
    seed_groups = random_groups(len(index), groups, np.random.default_rng(seed)) if groups else None

    distance = root_euclidean(affinity(first, epsilon, seed_groups), affinity(second, epsilon, seed_groups))
    similarity = 1.0 / (1.0 + distance)
    logger.debug("Similarity over %d nodes (eps=%.4f): distance %.6f", len(index), epsilon, distance)
    return similarity


__all__ = ["affinity", "graph_similarity", "random_groups", "root_euclidean", "shared_epsilon"]
