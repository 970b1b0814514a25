"""Bulk-synchronous, vertex-style Gibbs sampler.

Every vertex is a document. An iteration runs four phases separated by
barriers: the random walk propagates path weights down the tree as
messages, documents propose new parents, documents resample their token
levels, and the resulting count deltas travel to the nodes on each
document's path. Between barriers workers only read a snapshot of the
counts; all writes happen at a barrier.

With one worker the phases collapse into the serial sweep order, so the
chain is bit-identical to :func:`doctree.services.chain.gibbs_iteration`.
"""

from __future__ import annotations

import itertools
import multiprocessing
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from doctree.common import ParallelSamplerError, PartitionError, get_logger
from doctree.services.hdtm import (
    CountTables,
    SamplerState,
    check_state,
    detach_document,
    path_distribution,
    reattach_document,
    restore_document,
    sample_document_levels,
    sample_path,
)
from doctree.services.hierarchy import Hierarchy
from doctree.utils.numeric import sample_categorical, step_log_weight

logger = get_logger("services.parallel")

BACKENDS = ("inline", "process")


class MessageKind(str, Enum):
    PATH_WEIGHT = "path-weight"
    COUNT_DELTA = "count-delta"


class Phase(str, Enum):
    RWR_PROPAGATE = "rwr-propagate"
    PATH_SAMPLE = "path-sample"
    LEVEL_SAMPLE = "level-sample"
    PATH_GLOBAL_UPDATE = "path-global-update"


PHASE_ORDER: Tuple[Phase, ...] = (
    Phase.RWR_PROPAGATE,
    Phase.PATH_SAMPLE,
    Phase.LEVEL_SAMPLE,
    Phase.PATH_GLOBAL_UPDATE,
)


@dataclass(frozen=True)
class VertexMessage:
    """A message for one vertex, applied once at the next barrier.

    ``PATH_WEIGHT`` messages carry a log path weight. ``COUNT_DELTA`` messages
    carry net ``(word, delta)`` pairs for the destination's topic plus the
    number of the sender's tokens now assigned to it.
    """

    message_id: int
    destination: int
    kind: MessageKind
    weight: float = 0.0
    word_deltas: Tuple[Tuple[int, int], ...] = ()
    assigned_tokens: int = 0


@dataclass
class SuperstepSchedule:
    """Cycles through the iteration phases, counting barriers."""

    phase: Phase = Phase.RWR_PROPAGATE
    barrier: int = 0

    def advance(self) -> Phase:
        index = PHASE_ORDER.index(self.phase)
        self.phase = PHASE_ORDER[(index + 1) % len(PHASE_ORDER)]
        self.barrier += 1
        return self.phase


class MessageBus:
    """Inboxes keyed by vertex, swapped out wholesale at each barrier."""

    def __init__(self, num_vertices: int) -> None:
        self.num_vertices = num_vertices
        self.sent = 0
        self.received = 0
        self._ids = itertools.count()
        self._inbox: Dict[int, List[VertexMessage]] = defaultdict(list)

    @property
    def pending(self) -> int:
        return self.sent - self.received

    def send(self, destination: int, kind: MessageKind, **payload) -> VertexMessage:
        if not 0 <= destination < self.num_vertices:
            raise PartitionError(f"message addressed to vertex {destination}, only {self.num_vertices} exist")
        message = VertexMessage(next(self._ids), destination, kind, **payload)
        self._inbox[destination].append(message)
        self.sent += 1
        return message

    def deliver(self) -> Dict[int, List[VertexMessage]]:
        inbox, self._inbox = self._inbox, defaultdict(list)
        self.received += sum(len(messages) for messages in inbox.values())
        return dict(inbox)

    def check_conservation(self) -> None:
        if self.sent != self.received:
            raise PartitionError(f"{self.sent} messages sent but {self.received} received")


@dataclass(frozen=True)
class PathWeights:
    weights: Dict[int, float]
    supersteps: int
    messages: int


def distributed_rwr(
    hierarchy: Hierarchy,
    gamma: float,
    workers: int = 1,
    *,
    exclude: Optional[int] = None,
) -> PathWeights:
    """Propagate walk log weights from the root, one tree level per superstep.

    Each vertex sums its incoming weights (log-sum-exp; in a tree there is one
    message) and forwards ``weight + log((1-gamma)/deg)`` to every child. The
    walk does not enter ``exclude``.
    """
    bus = MessageBus(len(hierarchy))
    bus.send(hierarchy.root, MessageKind.PATH_WEIGHT, weight=0.0)
    weights: Dict[int, float] = {}
    supersteps = 0

    while bus.pending:
        inbox = bus.deliver()
        supersteps += 1
        for worker in range(workers):
            for vertex in sorted(vertex for vertex in inbox if vertex % workers == worker):
                incoming = [message.weight for message in inbox[vertex]]
                weight = incoming[0] if len(incoming) == 1 else float(logsumexp(incoming))
                weights[vertex] = weight
                children = hierarchy.children[vertex]
                if not children:
                    continue
                step = step_log_weight(gamma, len(children))
                for child in children:
                    if child != exclude:
                        bus.send(child, MessageKind.PATH_WEIGHT, weight=weight + step)

    bus.check_conservation()
    return PathWeights(weights=weights, supersteps=supersteps, messages=bus.sent)


def distributed_path_prior(state: SamplerState, doc: int) -> Dict[int, float]:
    """Candidate parents of a detached ``doc`` weighted by :func:`distributed_rwr`."""
    weights = distributed_rwr(state.hierarchy, state.hp.gamma, exclude=doc).weights
    return {
        source: weights[source]
        for source in state.graph.predecessors[doc]
        if source in weights and source != doc
    }


@dataclass(frozen=True)
class DocumentChange:
    """A document's token placement before and after a phase."""

    doc: int
    old_path: Tuple[int, ...]
    old_levels: np.ndarray
    new_path: Tuple[int, ...]
    new_levels: np.ndarray


def path_global_update(
    counts: CountTables,
    tokens: Sequence[np.ndarray],
    changes: Iterable[DocumentChange],
    bus: Optional[MessageBus] = None,
) -> MessageBus:
    """Ship each document's count deltas to the nodes on its paths and apply them.

    Every node on a document's new path gets a message, even with no word
    deltas; old-path nodes only when something left them. Level counts are
    document-local and are rebuilt from the new levels.

    Raises:
        CountConsistencyError: If a delta drives any count negative.
    """
    bus = bus or MessageBus(len(counts.node_word))
    for change in changes:
        deltas: Dict[int, Counter] = defaultdict(Counter)
        words = tokens[change.doc].tolist()
        for word, level in zip(words, change.old_levels.tolist()):
            deltas[change.old_path[level - 1]][word] -= 1
        for word, level in zip(words, change.new_levels.tolist()):
            deltas[change.new_path[level - 1]][word] += 1
        assigned = np.bincount(change.new_levels - 1, minlength=len(change.new_path))

        recipients = list(change.new_path) + [
            node for node in change.old_path if node not in change.new_path
        ]
        for index, node in enumerate(recipients):
            word_deltas = tuple(sorted((word, delta) for word, delta in deltas[node].items() if delta))
            if index >= len(change.new_path) and not word_deltas:
                continue
            bus.send(
                node,
                MessageKind.COUNT_DELTA,
                word_deltas=word_deltas,
                assigned_tokens=int(assigned[index]) if index < len(change.new_path) else 0,
            )
        counts.doc_level[change.doc] = assigned.astype(np.int64)

    for node, messages in sorted(bus.deliver().items()):
        for message in messages:
            for word, delta in message.word_deltas:
                counts.add(node, word, delta)
    bus.check_conservation()
    return bus


@dataclass(frozen=True)
class ParallelConfig:
    workers: int = 1
    backend: str = "inline"
    max_restarts: int = 2
    verify: bool = False

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be non-negative")


@dataclass
class ParallelStats:
    barriers: int = 0
    rejected_moves: int = 0
    accepted_moves: int = 0
    restarts: int = 0
    messages: int = 0


@dataclass(frozen=True)
class _PathTask:
    snapshot: SamplerState
    docs: Tuple[int, ...]
    weights: Dict[int, float]
    entropy: Tuple[int, ...]


@dataclass(frozen=True)
class _LevelTask:
    snapshot: SamplerState
    docs: Tuple[int, ...]
    entropy: Tuple[int, ...]


def _propose_parents(task: _PathTask) -> Dict[int, int]:
    """Worker body: draw a parent for each document against the snapshot."""
    state = task.snapshot.copy()
    rng = np.random.default_rng(np.random.SeedSequence(list(task.entropy)))
    hierarchy = state.hierarchy

    def stale_prior(current: SamplerState, target: int) -> Dict[int, float]:
        return {
            source: task.weights[source]
            for source in current.graph.predecessors[target]
            if source in task.weights and not hierarchy.is_ancestor(target, source)
        }

    proposals: Dict[int, int] = {}
    for doc in task.docs:
        old_parent, old_path = detach_document(state, doc)
        candidates, probabilities = path_distribution(state, doc, stale_prior)
        if candidates.size:
            proposals[doc] = int(candidates[sample_categorical(probabilities, rng)])
        restore_document(state, doc, old_parent, old_path)
    return proposals


def _resample_levels(task: _LevelTask) -> Dict[int, np.ndarray]:
    """Worker body: sweep levels of the worker's documents on a private copy."""
    state = task.snapshot.copy()
    rng = np.random.default_rng(np.random.SeedSequence(list(task.entropy)))
    for doc in task.docs:
        sample_document_levels(state, doc, rng)
    return {doc: state.levels[doc] for doc in task.docs}


class ParallelSampler:
    """Runs parallel Gibbs iterations over a worker pool.

    Use as a context manager when the ``process`` backend is selected so the
    pool is torn down.
    """

    def __init__(self, config: ParallelConfig) -> None:
        self.config = config
        self.stats = ParallelStats()
        self.schedule = SuperstepSchedule()
        self._pool = None
        if config.backend == "process" and config.workers > 1:
            self._pool = multiprocessing.Pool(processes=config.workers)

    def __enter__(self) -> "ParallelSampler":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    def _map(self, function: Callable, tasks: List) -> List:
        if self._pool is not None:
            return self._pool.map(function, tasks)
        return [function(task) for task in tasks]

    def _run_phase(self, phase: Phase, function: Callable, tasks: List) -> List:
        """Run one phase; on failure, retry from the last barrier's snapshot."""
        attempts = 0
        while True:
            try:
                return self._map(function, tasks)
            except (ValueError, RuntimeError, OSError) as exc:
                attempts += 1
                self.stats.restarts += 1
                if attempts > self.config.max_restarts:
                    raise ParallelSamplerError(
                        f"phase {phase.value} failed after {attempts} attempt(s)"
                    ) from exc
                logger.warning(
                    "Phase %s failed (%s); restarting from barrier %d",
                    phase.value,
                    exc,
                    self.schedule.barrier,
                )

    def _barrier(self, state: SamplerState) -> None:
        self.schedule.advance()
        self.stats.barriers += 1
        if self.config.verify:
            check_state(state)

    def _partition(self, docs: Iterable[int]) -> List[Tuple[int, ...]]:
        workers = self.config.workers
        buckets: List[List[int]] = [[] for _ in range(workers)]
        for doc in docs:
            buckets[doc % workers].append(doc)
        return [tuple(bucket) for bucket in buckets]

    def iteration(self, state: SamplerState, iteration: int) -> SamplerState:
        if self.config.workers == 1:
            return self._serial_iteration(state)
        return self._parallel_iteration(state, iteration)

    def _serial_iteration(self, state: SamplerState) -> SamplerState:
        hierarchy = state.hierarchy
        self._barrier(state)
        for doc in range(len(hierarchy)):
            if doc != hierarchy.root:
                sample_path(state, doc, state.rng, prior=distributed_path_prior)
        self._barrier(state)
        for doc in range(len(hierarchy)):
            sample_document_levels(state, doc, state.rng)
        self._barrier(state)
        self._barrier(state)
        return state

    def _parallel_iteration(self, state: SamplerState, iteration: int) -> SamplerState:
        hierarchy = state.hierarchy
        seed = state.seed

        rwr = distributed_rwr(hierarchy, state.hp.gamma, self.config.workers)
        self.stats.messages += rwr.messages
        self._barrier(state)

        # same-parity batches, ordered by depth at the start of the iteration
        parity = [hierarchy.depth[doc] % 2 for doc in range(len(hierarchy))]
        for batch in (1, 0):
            docs = [doc for doc in range(len(hierarchy)) if doc != hierarchy.root and parity[doc] == batch]
            if batch == 0:
                rwr = distributed_rwr(hierarchy, state.hp.gamma, self.config.workers)
                self.stats.messages += rwr.messages
            tasks = [
                _PathTask(state, part, rwr.weights, (seed, iteration, 1, batch, worker))
                for worker, part in enumerate(self._partition(docs))
                if part
            ]
            proposals: Dict[int, int] = {}
            for result in self._run_phase(Phase.PATH_SAMPLE, _propose_parents, tasks):
                proposals.update(result)
            self._apply_moves(state, proposals)
        self._barrier(state)

        tasks = [
            _LevelTask(state, part, (seed, iteration, 2, 0, worker))
            for worker, part in enumerate(self._partition(range(len(hierarchy))))
            if part
        ]
        new_levels: Dict[int, np.ndarray] = {}
        for result in self._run_phase(Phase.LEVEL_SAMPLE, _resample_levels, tasks):
            new_levels.update(result)
        self._barrier(state)

        changes = []
        for doc in sorted(new_levels):
            path = tuple(hierarchy.path(doc))
            changes.append(DocumentChange(doc, path, state.levels[doc], path, new_levels[doc]))
            state.levels[doc] = new_levels[doc]
        bus = path_global_update(state.counts, state.tokens, changes)
        self.stats.messages += bus.sent
        self._barrier(state)

        logger.debug(
            "Iteration %d: %d accepted moves, %d rejected so far, %d barriers",
            iteration,
            self.stats.accepted_moves,
            self.stats.rejected_moves,
            self.stats.barriers,
        )
        return state

    def _apply_moves(self, state: SamplerState, proposals: Dict[int, int]) -> None:
        """Apply proposed parents at the barrier, rejecting ones that would close a cycle.

        Moves run in id order on a scratch copy, which realigns the moving
        tokens; the resulting deltas reach the live counts as messages.
        """
        hierarchy = state.hierarchy
        moved: List[int] = []
        for doc in sorted(proposals):
            new_parent = proposals[doc]
            if new_parent == hierarchy.parent[doc]:
                continue
            if hierarchy.is_ancestor(doc, new_parent):
                self.stats.rejected_moves += 1
                continue
            moved.append(doc)
        if not moved:
            return

        affected = sorted({node for doc in moved for node in hierarchy.subtree(doc)})
        old_paths = {node: tuple(hierarchy.path(node)) for node in affected}
        scratch = state.copy()
        for doc in moved:
            # an earlier move in this batch may have pulled the proposal under doc
            if scratch.hierarchy.is_ancestor(doc, proposals[doc]):
                self.stats.rejected_moves += 1
                continue
            old_parent, old_path = detach_document(scratch, doc)
            reattach_document(scratch, doc, proposals[doc], old_parent, old_path)
            hierarchy.move(doc, proposals[doc])
            self.stats.accepted_moves += 1

        changes = []
        for node in affected:
            new_path = tuple(hierarchy.path(node))
            changes.append(DocumentChange(node, old_paths[node], state.levels[node], new_path, scratch.levels[node]))
            state.levels[node] = scratch.levels[node]
        bus = path_global_update(state.counts, state.tokens, changes)
        self.stats.messages += bus.sent


def parallel_gibbs_iteration(
    state: SamplerState,
    workers: int,
    seed: int,
    *,
    iteration: int = 1,
    backend: str = "inline",
    verify: bool = False,
) -> SamplerState:
    """One parallel iteration with a throwaway sampler.

    ``seed`` replaces the state's seed for deriving per-worker streams; with
    one worker the state's own generator is used, matching the serial chain.
    """
    state.seed = seed
    with ParallelSampler(ParallelConfig(workers=workers, backend=backend, verify=verify)) as sampler:
        return sampler.iteration(state, iteration)


__all__ = [
    "DocumentChange",
    "MessageBus",
    "MessageKind",
    "ParallelConfig",
    "ParallelSampler",
    "ParallelStats",
    "PathWeights",
    "Phase",
    "SuperstepSchedule",
    "VertexMessage",
    "distributed_path_prior",
    "distributed_rwr",
    "parallel_gibbs_iteration",
    "path_global_update",
]
