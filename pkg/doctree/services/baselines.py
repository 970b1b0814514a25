"""Non-model baselines: sitemap term propagation with Dirichlet smoothing, and fixed hierarchies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse

from doctree.common import get_logger
from doctree.services.corpus import DocumentGraph
from doctree.services.hierarchy import NO_PARENT, Hierarchy, bfs_hierarchy, repair_to_tree

logger = get_logger("services.baselines")

BASELINE_KINDS = ("bfs", "random-parent")


def term_frequencies(graph: DocumentGraph, vocabulary_size: Optional[int] = None) -> sparse.csr_matrix:
    """Nodes x words matrix of raw term counts."""
    largest = max((max(record.tokens) for record in graph.nodes if record.tokens), default=-1)
    width = vocabulary_size if vocabulary_size is not None else largest + 1
    rows = [node for node, record in enumerate(graph.nodes) for _ in record.tokens]
    cols = [word for record in graph.nodes for word in record.tokens]
    matrix = sparse.csr_matrix(
        (np.ones(len(cols)), (rows, cols)), shape=(graph.num_nodes, max(width, 1))
    )
    matrix.sum_duplicates()
    return matrix


@dataclass(frozen=True)
class PropagatedFrequencies:
    """Adjusted term frequencies f' per node plus the raw matrix they came from."""

    adjusted: sparse.csr_matrix
    raw: sparse.csr_matrix
    alpha: float

    @property
    def lengths(self) -> np.ndarray:
        """|d|', the total adjusted mass per node."""
        return np.asarray(self.adjusted.sum(axis=1)).ravel()


def _child_mixing(hierarchy: Hierarchy) -> sparse.csr_matrix:
    rows, cols, values = [], [], []
    for node, children in enumerate(hierarchy.children):
        for child in children:
            rows.append(node)
            cols.append(child)
            values.append(1.0 / len(children))
    size = len(hierarchy)
    return sparse.csr_matrix((values, (rows, cols)), shape=(size, size))


def term_propagation(
    graph: DocumentGraph,
    hierarchy: Hierarchy,
    alpha: float,
    *,
    vocabulary_size: Optional[int] = None,
    recursive: bool = False,
) -> PropagatedFrequencies:
    """Mix each node's term frequencies with the mean of its children's.

    ``f'(w;d) = (1+alpha) f(w;d) + (1-alpha)/|Child(d)| * sum_c f(w;c)``.
    With ``recursive`` the children contribute their own adjusted f',
    computed bottom-up, so the root collects words from the whole tree.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"propagation alpha must lie in [0, 1], got {alpha}")
    raw = term_frequencies(graph, vocabulary_size)
    mixing = _child_mixing(hierarchy)

    if not recursive:
        adjusted = (1.0 + alpha) * raw + (1.0 - alpha) * (mixing @ raw)
        return PropagatedFrequencies(sparse.csr_matrix(adjusted), raw, alpha)

    rows: List[Optional[sparse.csr_matrix]] = [None] * graph.num_nodes
    for node in sorted(range(graph.num_nodes), key=lambda item: -hierarchy.depth[item]):
        row = (1.0 + alpha) * raw.getrow(node)
        children = hierarchy.children[node]
        if children:
            row = row + (1.0 - alpha) / len(children) * sum(rows[child] for child in children)
        rows[node] = sparse.csr_matrix(row)
    return PropagatedFrequencies(sparse.vstack(rows, format="csr"), raw, alpha)


@dataclass(frozen=True)
class SmoothedLanguageModel:
    """``p(w;d) = (f'(w;d) + mu p(w|C)) / (|d|' + mu)`` for every node."""

    propagated: PropagatedFrequencies
    mu: float
    background: np.ndarray

    def distribution(self, node: int) -> np.ndarray:
        row = self.propagated.adjusted.getrow(node).toarray().ravel()
        return (row + self.mu * self.background) / (row.sum() + self.mu)

    def top_words(self, node: int, limit: int) -> List[Tuple[int, float]]:
        probabilities = self.distribution(node)
        order = np.lexsort((np.arange(probabilities.size), -probabilities))[:limit]
        return [(int(word), float(probabilities[word])) for word in order]


def dirichlet_smooth(propagated: PropagatedFrequencies, mu: float) -> SmoothedLanguageModel:
    """Smooth propagated frequencies toward the corpus-wide term distribution.

    Raises:
        ValueError: If ``mu`` is not positive or the corpus has no tokens.
    """
    if not mu > 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    column_totals = np.asarray(propagated.raw.sum(axis=0)).ravel()
    total = column_totals.sum()
    if total <= 0:
        raise ValueError("the corpus has no tokens to build a background distribution from")
    return SmoothedLanguageModel(propagated, mu, column_totals / total)


def random_parent_hierarchy(graph: DocumentGraph, seed: int) -> Hierarchy:
    """One uniformly random in-neighbour per node, repaired into a tree.

    A node cut off from the root redraws uniformly among its in-neighbours
    already anchored to the root.
    """
    rng = np.random.default_rng(seed)
    parents = [NO_PARENT] * graph.num_nodes
    options = []
    for node in range(graph.num_nodes):
        if node == graph.root:
            continue
        order = [int(item) for item in rng.permutation(graph.predecessors[node])]
        parents[node] = order[0]
        options.append((node, order))
    return repair_to_tree(parents, graph.root, options, bfs_hierarchy(graph))


def baseline_hierarchies(graph: DocumentGraph, kind: str, seed: int = 0) -> Hierarchy:
    if kind == "bfs":
        return bfs_hierarchy(graph)
    if kind == "random-parent":
        hierarchy = random_parent_hierarchy(graph, seed)
        hierarchy.validate(graph)
        return hierarchy
    raise ValueError(f"unknown baseline kind {kind!r}; expected one of {BASELINE_KINDS}")


__all__ = [
    "BASELINE_KINDS",
    "PropagatedFrequencies",
    "SmoothedLanguageModel",
    "baseline_hierarchies",
    "dirichlet_smooth",
    "random_parent_hierarchy",
    "term_frequencies",
    "term_propagation",
]
