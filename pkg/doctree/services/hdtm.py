"""Collapsed Gibbs sampler state and the per-variable sampling steps.

Every graph node owns one topic. A document's tokens mix over the topics
of the nodes on its root path; the path itself is chosen by a random walk
with restart over the current hierarchy, restricted to graph in-edges.
Topic proportions and word distributions are integrated out, so the state
is the hierarchy, one level per token and the count tables those imply.
"""

from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp

from doctree.common import CountConsistencyError, get_logger
from doctree.services.corpus import DocumentGraph
from doctree.services.hierarchy import Hierarchy, bfs_hierarchy
from doctree.utils.numeric import normalize_log_weights, pick_index, sample_categorical, step_log_weight

logger = get_logger("services.hdtm")

PathPrior = Callable[["SamplerState", int], Dict[int, float]]


@dataclass(frozen=True)
class Hyperparameters:
    """Model hyperparameters.

    ``alpha`` is validated and recorded but no collapsed sampling step reads
    it; it only drives the planted-corpus generator.
    """

    gamma: float = 0.95
    eta: float = 0.1
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gamma) and 0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not (math.isfinite(self.eta) and self.eta > 0.0):
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not (math.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def as_dict(self) -> Dict[str, float]:
        return {"gamma": self.gamma, "eta": self.eta, "alpha": self.alpha}


class CountTables:
    """Sparse node-word counts, node totals and per-document level counts."""

    def __init__(self, num_nodes: int) -> None:
        self.node_word: List[Dict[int, int]] = [{} for _ in range(num_nodes)]
        self.node_total = np.zeros(num_nodes, dtype=np.int64)
        self.doc_level: List[np.ndarray] = [np.zeros(1, dtype=np.int64) for _ in range(num_nodes)]

    def add(self, node: int, word: int, delta: int) -> None:
        table = self.node_word[node]
        updated = table.get(word, 0) + delta
        if updated < 0 or self.node_total[node] + delta < 0:
            raise CountConsistencyError(
                f"count of word {word} at node {node} would become {updated}"
            )
        if updated:
            table[word] = updated
        else:
            table.pop(word, None)
        self.node_total[node] += delta

    def total(self) -> int:
        return int(self.node_total.sum())

    def copy(self) -> "CountTables":
        clone = CountTables.__new__(CountTables)
        clone.node_word = [dict(table) for table in self.node_word]
        clone.node_total = self.node_total.copy()
        clone.doc_level = [row.copy() for row in self.doc_level]
        return clone

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CountTables):
            return NotImplemented
        return (
            self.node_word == other.node_word
            and np.array_equal(self.node_total, other.node_total)
            and len(self.doc_level) == len(other.doc_level)
            and all(np.array_equal(a, b) for a, b in zip(self.doc_level, other.doc_level))
        )


@dataclass
class SamplerState:
    graph: DocumentGraph
    hp: Hyperparameters
    hierarchy: Hierarchy
    tokens: List[np.ndarray]
    levels: List[np.ndarray]
    counts: CountTables
    vocabulary_size: int
    seed: int
    rng: np.random.Generator

    def copy(self) -> "SamplerState":
        return SamplerState(
            graph=self.graph,
            hp=self.hp,
            hierarchy=self.hierarchy.copy(),
            tokens=self.tokens,
            levels=[row.copy() for row in self.levels],
            counts=self.counts.copy(),
            vocabulary_size=self.vocabulary_size,
            seed=self.seed,
            rng=copy.deepcopy(self.rng),
        )

    @property
    def total_tokens(self) -> int:
        return int(sum(row.size for row in self.tokens))


def _tally(
    counts: CountTables,
    tokens: np.ndarray,
    levels: np.ndarray,
    path: Sequence[int],
    sign: int,
) -> None:
    for word, level in zip(tokens.tolist(), levels.tolist()):
        counts.add(path[level - 1], word, sign)


def remove_document_tokens(state: SamplerState, doc: int, path: Optional[Sequence[int]] = None) -> None:
    """Take a document's own tokens out of the node-word counts."""
    path = path if path is not None else state.hierarchy.path(doc)
    _tally(state.counts, state.tokens[doc], state.levels[doc], path, -1)


def add_document_tokens(state: SamplerState, doc: int, path: Optional[Sequence[int]] = None) -> None:
    path = path if path is not None else state.hierarchy.path(doc)
    _tally(state.counts, state.tokens[doc], state.levels[doc], path, +1)


def refit_levels(state: SamplerState, doc: int, path: Sequence[int]) -> None:
    """Clamp levels to ``path`` and rebuild the document's level counts."""
    levels = state.levels[doc]
    np.minimum(levels, len(path), out=levels)
    state.counts.doc_level[doc] = np.bincount(levels - 1, minlength=len(path)).astype(np.int64)


def init_state(
    graph: DocumentGraph,
    hp: Hyperparameters,
    seed: int,
    *,
    vocabulary_size: Optional[int] = None,
) -> SamplerState:
    """BFS hierarchy plus uniformly drawn levels, with consistent counts."""
    hierarchy = bfs_hierarchy(graph)
    rng = np.random.default_rng(seed)
    tokens = [np.asarray(record.tokens, dtype=np.int64) for record in graph.nodes]
    largest_word = max((int(row.max()) for row in tokens if row.size), default=0)
    if vocabulary_size is None:
        vocabulary_size = largest_word + 1
    elif vocabulary_size <= largest_word:
        raise ValueError(f"vocabulary size {vocabulary_size} does not cover word id {largest_word}")

    state = SamplerState(
        graph=graph,
        hp=hp,
        hierarchy=hierarchy,
        tokens=tokens,
        levels=[],
        counts=CountTables(graph.num_nodes),
        vocabulary_size=vocabulary_size,
        seed=seed,
        rng=rng,
    )
    for doc in range(graph.num_nodes):
        path = hierarchy.path(doc)
        levels = rng.integers(1, len(path) + 1, size=tokens[doc].size).astype(np.int64)
        state.levels.append(levels)
        refit_levels(state, doc, path)
        add_document_tokens(state, doc, path)

    logger.debug(
        "Initialized state: %d documents, %d tokens, W=%d, average depth %.3f",
        graph.num_nodes,
        state.total_tokens,
        vocabulary_size,
        hierarchy.average_depth(),
    )
    return state


def rwr_path_probs(
    hierarchy: Hierarchy,
    graph: DocumentGraph,
    target: int,
    gamma: float,
) -> Dict[int, float]:
    """Log probability of the walker reaching each graph in-neighbour of ``target``.

    The walk starts at the root with weight 0, adds ``log((1-gamma)/deg(u))``
    per step and never enters ``target``, so nodes of its subtree are never
    candidates. The hop from the candidate to ``target`` is not included.
    """
    if target == hierarchy.root:
        raise ValueError("the root has no path to sample")

    weights: Dict[int, float] = {}
    for source in graph.predecessors[target]:
        chain = hierarchy.path(source)
        if chain[0] != hierarchy.root or target in chain:
            continue
        weight = 0.0
        for node in chain[:-1]:
            weight = weight + step_log_weight(gamma, hierarchy.degree(node))
        weights[source] = weight
    return dict(sorted(weights.items()))


def serial_path_prior(state: SamplerState, doc: int) -> Dict[int, float]:
    return rwr_path_probs(state.hierarchy, state.graph, doc, state.hp.gamma)


def _fit_matrix(state: SamplerState, path: Sequence[int], words: np.ndarray) -> np.ndarray:
    """log of the smoothed word probability, one row per path node, one column per word."""
    eta = state.hp.eta
    smoothing = state.vocabulary_size * eta
    word_list = words.tolist()
    counts = np.array(
        [[state.counts.node_word[node].get(word, 0) for word in word_list] for node in path],
        dtype=float,
    ).reshape(len(path), len(word_list))
    totals = state.counts.node_total[list(path)].astype(float)
    return np.log(counts + eta) - np.log(totals + smoothing)[:, None]


def _best_levels(fit: np.ndarray, inverse: np.ndarray) -> np.ndarray:
    # ties go to the deeper node
    deepest = fit.shape[0] - 1 - np.argmax(fit[::-1], axis=0)
    return (deepest + 1)[inverse].astype(np.int64)


def align_levels(state: SamplerState, path: Sequence[int], words: np.ndarray) -> np.ndarray:
    """Level on ``path`` whose node best explains each word, under the current counts."""
    words = np.asarray(words, dtype=np.int64)
    if words.size == 0:
        return np.zeros(0, dtype=np.int64)
    unique, inverse = np.unique(words, return_inverse=True)
    return _best_levels(_fit_matrix(state, path, unique), inverse)


def carried_tokens(state: SamplerState, doc: int, depth: int) -> List[Tuple[int, np.ndarray]]:
    """Descendants of ``doc`` with tokens sitting on ``doc``'s ancestors, as (node, mask) pairs.

    ``depth`` is the depth ``doc`` had when those levels were drawn.
    """
    carried = []
    for node in state.hierarchy.subtree(doc)[1:]:
        mask = state.levels[node] <= depth
        if mask.any():
            carried.append((node, mask))
    return carried


def _carried_words(state: SamplerState, carried: Sequence[Tuple[int, np.ndarray]]) -> np.ndarray:
    if not carried:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([state.tokens[node][mask] for node, mask in carried])


def _align_block(
    state: SamplerState,
    path: Sequence[int],
    own_words: np.ndarray,
    carried_words: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Aligned levels for a moving document's tokens and its carried tokens.

    Carried tokens may only land above the document itself.
    """
    words = np.concatenate((own_words, carried_words))
    if words.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    unique, inverse = np.unique(words, return_inverse=True)
    fit = _fit_matrix(state, path, unique)
    own = _best_levels(fit, inverse[: own_words.size])
    carried = _best_levels(fit[:-1], inverse[own_words.size :])
    return own, carried


def _block_log_likelihood(state: SamplerState, nodes: np.ndarray, words: np.ndarray) -> float:
    """Log Dirichlet-multinomial ratio of placing ``words`` on ``nodes`` given the counts."""
    eta = state.hp.eta
    smoothing = state.vocabulary_size * eta
    total = 0.0
    for node in np.unique(nodes).tolist():
        placed, block_counts = np.unique(words[nodes == node], return_counts=True)
        table = state.counts.node_word[node]
        node_counts = np.fromiter(
            (table.get(word, 0) for word in placed.tolist()), dtype=float, count=placed.size
        )
        node_total = float(state.counts.node_total[node])
        total += gammaln(node_total + smoothing) - gammaln(node_total + block_counts.sum() + smoothing)
        total += float(np.sum(gammaln(node_counts + block_counts + eta) - gammaln(node_counts + eta)))
    return float(total)


def path_log_likelihood(
    state: SamplerState,
    doc: int,
    candidate_parent: int,
    levels: Optional[np.ndarray] = None,
) -> float:
    """Log Dirichlet-multinomial ratio of ``doc``'s words along a candidate path.

    The counts must already exclude ``doc``'s own tokens. Without ``levels``
    the current levels are used, deeper ones evaluated at the deepest level.
    """
    tokens = state.tokens[doc]
    if tokens.size == 0:
        return 0.0

    path = np.asarray(state.hierarchy.path(candidate_parent) + [doc], dtype=np.int64)
    if levels is None:
        levels = np.minimum(state.levels[doc], path.size)
    return _block_log_likelihood(state, path[np.asarray(levels) - 1], tokens)


def path_distribution(
    state: SamplerState,
    doc: int,
    prior: Optional[PathPrior] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Candidate parents of a detached document and their posterior probabilities.

    Each candidate is scored with the document's tokens, and the subtree
    tokens that sat above it, aligned to that candidate's path.
    """
    priors = (prior or serial_path_prior)(state, doc)
    if not priors:
        return np.zeros(0, dtype=np.int64), np.zeros(0)

    own_words = state.tokens[doc]
    carried_words = _carried_words(state, carried_tokens(state, doc, state.hierarchy.depth[doc]))
    words = np.concatenate((own_words, carried_words))
    candidates = np.fromiter(priors.keys(), dtype=np.int64, count=len(priors))
    log_weights = np.empty(candidates.size)
    for index, candidate in enumerate(candidates.tolist()):
        path = np.asarray(state.hierarchy.path(candidate) + [doc], dtype=np.int64)
        own, carried = _align_block(state, path, own_words, carried_words)
        nodes = path[np.concatenate((own, carried)) - 1]
        log_weights[index] = priors[candidate] + _block_log_likelihood(state, nodes, words)
    return candidates, normalize_log_weights(log_weights)


def detach_document(state: SamplerState, doc: int) -> Tuple[int, List[int]]:
    """Remove ``doc``'s tokens and unlink its subtree; returns (old parent, old path).

    Subtree tokens sitting above ``doc`` leave the counts too, since their
    nodes change whenever the parent does.
    """
    if doc == state.hierarchy.root:
        raise ValueError("the root has no path to sample")
    hierarchy = state.hierarchy
    old_path = hierarchy.path(doc)
    remove_document_tokens(state, doc, old_path)
    for node, mask in carried_tokens(state, doc, len(old_path) - 1):
        _tally(state.counts, state.tokens[node][mask], state.levels[node][mask], hierarchy.path(node), -1)
    old_parent = hierarchy.detach(doc)
    return old_parent, old_path


def reattach_document(state: SamplerState, doc: int, new_parent: int, old_parent: int, old_path: List[int]) -> None:
    """Hang ``doc`` under ``new_parent`` with aligned levels for the moving tokens.

    Subtree tokens below ``doc`` keep their nodes; their levels shift by the
    change in depth.
    """
    hierarchy = state.hierarchy
    old_depth = len(old_path) - 1
    carried = carried_tokens(state, doc, old_depth)
    path = hierarchy.path(new_parent) + [doc]
    own, aligned = _align_block(state, path, state.tokens[doc], _carried_words(state, carried))

    hierarchy.attach(doc, new_parent)
    shift = hierarchy.depth[doc] - old_depth
    masks = dict(carried)
    offset = 0
    for node in hierarchy.subtree(doc)[1:]:
        levels = state.levels[node]
        mask = masks.get(node)
        if mask is None:
            levels += shift
        else:
            moved = int(mask.sum())
            levels[~mask] += shift
            levels[mask] = aligned[offset : offset + moved]
            offset += moved
            _tally(state.counts, state.tokens[node][mask], levels[mask], hierarchy.path(node), +1)
        state.counts.doc_level[node] = np.bincount(levels - 1, minlength=hierarchy.depth[node] + 1).astype(np.int64)

    state.levels[doc] = own
    refit_levels(state, doc, path)
    add_document_tokens(state, doc, path)


def restore_document(state: SamplerState, doc: int, old_parent: int, old_path: List[int]) -> None:
    """Undo :func:`detach_document` exactly, levels untouched."""
    hierarchy = state.hierarchy
    carried = carried_tokens(state, doc, len(old_path) - 1)
    hierarchy.attach(doc, old_parent)
    for node, mask in carried:
        _tally(state.counts, state.tokens[node][mask], state.levels[node][mask], hierarchy.path(node), +1)
    add_document_tokens(state, doc, old_path)


def sample_path(
    state: SamplerState,
    doc: int,
    rng: np.random.Generator,
    *,
    prior: Optional[PathPrior] = None,
) -> SamplerState:
    """Resample the parent of ``doc``; its whole subtree moves with it."""
    old_parent, old_path = detach_document(state, doc)
    candidates, probabilities = path_distribution(state, doc, prior)
    if candidates.size == 0:
        restore_document(state, doc, old_parent, old_path)
        return state
    new_parent = int(candidates[sample_categorical(probabilities, rng)])
    reattach_document(state, doc, new_parent, old_parent, old_path)
    return state


def _ratio(numerator: np.ndarray, denominator: np.ndarray, levels: int) -> np.ndarray:
    # empty counters fall back to add-one smoothing
    smoothed = (numerator + 1.0) / (denominator + levels)
    safe = np.where(denominator > 0, denominator, 1.0)
    return np.where((numerator > 0) & (denominator > 0), numerator / safe, smoothed)


def _smoothed_ratio(numerator: float, denominator: float, levels: int) -> float:
    if numerator > 0 and denominator > 0:
        return numerator / denominator
    return (numerator + 1.0) / (denominator + levels)


def walk_log_factors(hierarchy: Hierarchy, path: Sequence[int], gamma: float) -> np.ndarray:
    degrees = np.array([max(hierarchy.degree(node), 1) for node in path], dtype=float)
    return np.log((1.0 - gamma) / degrees)


def level_log_prior(walk: np.ndarray, level_counts: np.ndarray) -> np.ndarray:
    """Unnormalized log prior over levels 1..L given the other tokens' levels.

    ``level_counts`` may be a stack of count vectors; the prior is taken
    along the last axis.
    """
    counts = np.asarray(level_counts, dtype=float)
    num_levels = counts.shape[-1]
    edge = np.zeros(counts.shape[:-1] + (1,))
    at_least = np.flip(np.cumsum(np.flip(counts, axis=-1), axis=-1), axis=-1)
    deeper = np.concatenate((at_least[..., 1:], edge), axis=-1)
    log_continue = np.log(_ratio(deeper, at_least, num_levels))
    log_stop = np.log(_ratio(counts, at_least, num_levels))
    passed = np.concatenate((edge, np.cumsum(walk + log_continue, axis=-1)[..., :-1]), axis=-1)
    return passed + walk + log_stop


def _level_probabilities(
    word_counts: Sequence[int],
    walk: Sequence[float],
    level_counts: Sequence[int],
    eta: float,
) -> List[float]:
    """Normalized level weights for one token, in plain floats for the sweep loop."""
    num_levels = len(walk)
    at_least = list(itertools.accumulate(reversed(level_counts)))[::-1]
    log_weights = []
    passed = 0.0
    for level in range(num_levels):
        reached = at_least[level]
        deeper = at_least[level + 1] if level + 1 < num_levels else 0
        stop = math.log(_smoothed_ratio(level_counts[level], reached, num_levels))
        log_weights.append(passed + walk[level] + stop + math.log(word_counts[level] + eta))
        passed += walk[level] + math.log(_smoothed_ratio(deeper, reached, num_levels))
    top = max(log_weights)
    weights = [math.exp(value - top) for value in log_weights]
    total = sum(weights)
    return [weight / total for weight in weights]


def level_distribution(
    state: SamplerState,
    doc: int,
    position: int,
    path: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Probabilities of levels 1..L for one token whose count is already removed."""
    path = path if path is not None else state.hierarchy.path(doc)
    word = int(state.tokens[doc][position])
    walk = walk_log_factors(state.hierarchy, path, state.hp.gamma).tolist()
    word_counts = [state.counts.node_word[node].get(word, 0) for node in path]
    return np.array(
        _level_probabilities(word_counts, walk, state.counts.doc_level[doc].tolist(), state.hp.eta)
    )


def sample_level(
    state: SamplerState,
    doc: int,
    position: int,
    rng: np.random.Generator,
    *,
    path: Optional[Sequence[int]] = None,
) -> SamplerState:
    """Resample the level of one token."""
    path = path if path is not None else state.hierarchy.path(doc)
    if len(path) == 1:
        return state

    word = int(state.tokens[doc][position])
    current = int(state.levels[doc][position])
    state.counts.add(path[current - 1], word, -1)
    state.counts.doc_level[doc][current - 1] -= 1

    probabilities = level_distribution(state, doc, position, path)
    chosen = sample_categorical(probabilities, rng) + 1

    state.levels[doc][position] = chosen
    state.counts.add(path[chosen - 1], word, +1)
    state.counts.doc_level[doc][chosen - 1] += 1
    return state


def sample_document_levels(state: SamplerState, doc: int, rng: np.random.Generator) -> None:
    """Resample every token level of ``doc`` in position order.

    Draws the same levels as calling :func:`sample_level` per position with
    the same generator, on plain Python containers.
    """
    path = state.hierarchy.path(doc)
    tokens = state.tokens[doc]
    if len(path) == 1 or tokens.size == 0:
        return

    eta = state.hp.eta
    walk = walk_log_factors(state.hierarchy, path, state.hp.gamma).tolist()
    tables = [state.counts.node_word[node] for node in path]
    moved = [0] * len(path)
    level_counts = state.counts.doc_level[doc].tolist()
    levels = state.levels[doc].tolist()
    for position, word in enumerate(tokens.tolist()):
        current = levels[position] - 1
        remaining = tables[current].get(word, 0) - 1
        if remaining < 0:
            raise CountConsistencyError(f"count of word {word} at node {path[current]} would become {remaining}")
        if remaining:
            tables[current][word] = remaining
        else:
            del tables[current][word]
        level_counts[current] -= 1

        probabilities = _level_probabilities(
            [table.get(word, 0) for table in tables], walk, level_counts, eta
        )
        chosen = pick_index(probabilities, rng.random())

        tables[chosen][word] = tables[chosen].get(word, 0) + 1
        level_counts[chosen] += 1
        moved[current] -= 1
        moved[chosen] += 1
        levels[position] = chosen + 1

    state.levels[doc][:] = levels
    state.counts.doc_level[doc] = np.array(level_counts, dtype=np.int64)
    for node, delta in zip(path, moved):
        state.counts.node_total[node] += delta


def word_log_likelihood(state: SamplerState) -> float:
    """Sum over nodes of the collapsed Dirichlet-multinomial log marginal."""
    eta = state.hp.eta
    smoothing = state.vocabulary_size * eta
    total = 0.0
    for node, table in enumerate(state.counts.node_word):
        node_total = float(state.counts.node_total[node])
        if node_total == 0:
            continue
        counts = np.fromiter(table.values(), dtype=float, count=len(table))
        total += gammaln(smoothing) - gammaln(node_total + smoothing)
        total += float(np.sum(gammaln(counts + eta) - gammaln(eta)))
    return total


def path_log_prior(hierarchy: Hierarchy, doc: int, gamma: float) -> float:
    """Log probability of the walk from the root reaching ``doc`` in the current tree."""
    path = hierarchy.path(doc)
    return float(sum(step_log_weight(gamma, hierarchy.degree(node)) for node in path[:-1]))


def level_log_likelihood(state: SamplerState, doc: int) -> float:
    path = state.hierarchy.path(doc)
    level_counts = state.counts.doc_level[doc]
    if len(path) == 1 or level_counts.sum() == 0:
        return 0.0

    walk = walk_log_factors(state.hierarchy, path, state.hp.gamma)
    present = np.flatnonzero(level_counts)
    rows = np.arange(present.size)
    others = np.tile(level_counts, (present.size, 1))
    others[rows, present] -= 1
    log_prior = level_log_prior(walk, others)
    chosen = log_prior[rows, present] - logsumexp(log_prior, axis=1)
    return float(np.sum(level_counts[present] * chosen))


def log_likelihood(state: SamplerState, hp: Optional[Hyperparameters] = None) -> float:
    """Log probability of the hierarchy, the levels and the words.

    Word term per node topic, plus the walk probability of every document's
    path, plus the level prior of every token given its document's others.
    """
    if hp is not None and hp != state.hp:
        raise ValueError("hyperparameters differ from the ones the state was built with")

    hierarchy = state.hierarchy
    gamma = state.hp.gamma
    total = word_log_likelihood(state)
    for doc in range(len(hierarchy)):
        if doc != hierarchy.root:
            total += path_log_prior(hierarchy, doc, gamma)
        total += level_log_likelihood(state, doc)
    return float(total)


def top_word_ids(counts: CountTables, node: int, limit: int) -> List[Tuple[int, int]]:
    """Most frequent ``(word id, count)`` pairs at a node; ties go to the lower id.

    Ranking by raw count equals ranking by the smoothed (n+eta)/(N+W*eta).
    """
    table = counts.node_word[node]
    ranked = sorted(table.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:limit]


def recount(state: SamplerState) -> CountTables:
    """Tally counts from scratch out of (hierarchy, levels)."""
    counts = CountTables(len(state.hierarchy))
    for doc in range(len(state.hierarchy)):
        path = state.hierarchy.path(doc)
        counts.doc_level[doc] = np.bincount(state.levels[doc] - 1, minlength=len(path)).astype(np.int64)
        _tally(counts, state.tokens[doc], state.levels[doc], path, +1)
    return counts


def counts_under(state: SamplerState, hierarchy: Hierarchy) -> CountTables:
    """Counts implied by the state's levels when placed on another hierarchy."""
    moved = state.copy()
    moved.hierarchy = hierarchy.copy()
    for doc in range(len(hierarchy)):
        np.minimum(moved.levels[doc], hierarchy.depth[doc] + 1, out=moved.levels[doc])
    return recount(moved)


def check_state(state: SamplerState) -> None:
    """Assert the tree, level-bound and count-conservation invariants.

    Raises:
        HierarchyError: If the hierarchy is not a rooted tree inside the graph.
        CountConsistencyError: If levels leave their path or counts drift.
    """
    state.hierarchy.validate(state.graph)
    for doc, levels in enumerate(state.levels):
        if levels.size and (levels.min() < 1 or levels.max() > state.hierarchy.depth[doc] + 1):
            raise CountConsistencyError(f"document {doc} has a level outside 1..{state.hierarchy.depth[doc] + 1}")
    if state.counts.total() != state.total_tokens:
        raise CountConsistencyError(
            f"node totals sum to {state.counts.total()}, corpus has {state.total_tokens} tokens"
        )
    if recount(state) != state.counts:
        raise CountConsistencyError("count tables differ from a recount of hierarchy and levels")


__all__ = [
    "CountTables",
    "Hyperparameters",
    "SamplerState",
    "align_levels",
    "check_state",
    "init_state",
    "detach_document",
    "level_distribution",
    "log_likelihood",
    "path_distribution",
    "path_log_likelihood",
    "reattach_document",
    "recount",
    "restore_document",
    "rwr_path_probs",
    "sample_document_levels",
    "sample_level",
    "sample_path",
    "top_word_ids",
]
