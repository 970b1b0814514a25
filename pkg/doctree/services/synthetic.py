"""Planted corpora drawn from the model's generative story.

A known tree is laid out first. Every node owns a disjoint block of
words as its topic. Each document draws topic proportions over its root
path from a symmetric Dirichlet(alpha) and every token picks a level from
those proportions and a word from that level's block. Shortcut edges from
ancestors make the document graph richer than the planted tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from doctree.common import get_logger
from doctree.services.corpus import DocumentGraph, Vocabulary, build_graph
from doctree.services.hierarchy import Hierarchy

logger = get_logger("services.synthetic")


@dataclass(frozen=True)
class PlantedCorpus:
    graph: DocumentGraph
    vocabulary: Vocabulary
    tree: Hierarchy

    def recovered_fraction(self, hierarchy: Hierarchy) -> float:
        """Share of non-root planted parent edges present in ``hierarchy``."""
        nodes = [node for node in range(len(self.tree)) if node != self.tree.root]
        if not nodes:
            return 1.0
        hits = sum(1 for node in nodes if hierarchy.parent[node] == self.tree.parent[node])
        return hits / len(nodes)


def node_name(index: int) -> str:
    return f"n{index:04d}"


def planted_corpus(
    num_nodes: int = 50,
    *,
    branching: int = 3,
    words_per_topic: int = 8,
    tokens_per_doc: int = 200,
    alpha: float = 1.0,
    shortcut_probability: float = 0.5,
    seed: int = 0,
) -> PlantedCorpus:
    """Generate a corpus on a complete ``branching``-ary tree of ``num_nodes`` nodes.

    Node ``i`` hangs under ``(i - 1) // branching``. Every ancestor above the
    parent links to a node with ``shortcut_probability``.
    """
    if num_nodes < 1:
        raise ValueError("a planted corpus needs at least one node")
    if branching < 1 or words_per_topic < 1 or tokens_per_doc < 0:
        raise ValueError("branching and words_per_topic must be positive, tokens_per_doc non-negative")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not 0.0 <= shortcut_probability <= 1.0:
        raise ValueError("shortcut_probability must lie in [0, 1]")

    rng = np.random.default_rng(seed)
    parent = [-1] + [(node - 1) // branching for node in range(1, num_nodes)]
    tree = Hierarchy(parent, 0)

    documents: Dict[str, List[str]] = {}
    edges: List[Tuple[str, str]] = []
    for node in range(num_nodes):
        path = tree.path(node)
        proportions = rng.dirichlet(np.full(len(path), alpha))
        levels = rng.choice(len(path), size=tokens_per_doc, p=proportions)
        picks = rng.integers(0, words_per_topic, size=tokens_per_doc)
        documents[node_name(node)] = [
            f"w{path[level]:04d}x{pick}" for level, pick in zip(levels.tolist(), picks.tolist())
        ]
        if node == 0:
            continue
        edges.append((node_name(parent[node]), node_name(node)))
        for ancestor in path[:-2]:
            if rng.random() < shortcut_probability:
                edges.append((node_name(ancestor), node_name(node)))

    graph, vocabulary = build_graph(documents, edges, node_name(0))
    logger.debug(
        "Planted corpus: %d nodes, %d edges, %d words, depth %d",
        graph.num_nodes,
        len(graph.edges),
        vocabulary.size,
        tree.max_depth(),
    )
    return PlantedCorpus(graph=graph, vocabulary=vocabulary, tree=tree)


__all__ = ["PlantedCorpus", "node_name", "planted_corpus"]
