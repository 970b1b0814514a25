"""Gibbs chain driver: sweep schedule, sample collection, MAP selection and checkpoints."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from doctree.common import get_logger
from doctree.services.corpus import DocumentGraph
from doctree.services.hdtm import (
    Hyperparameters,
    SamplerState,
    init_state,
    log_likelihood,
    recount,
    sample_document_levels,
    sample_path,
    top_word_ids,
)
from doctree.services.hierarchy import NO_PARENT, Hierarchy, bfs_hierarchy, repair_to_tree
from doctree.services.parallel import PHASE_ORDER, ParallelConfig, ParallelSampler

logger = get_logger("services.chain")

CHECKPOINT_FORMAT = "doctree-checkpoint"
CHECKPOINT_VERSION = 1
DIAGNOSTIC_COLUMNS = ["iteration", "log_likelihood", "avg_depth"]
BARRIERS_PER_ITERATION = len(PHASE_ORDER)


@dataclass(frozen=True)
class GibbsConfig:
    """Chain schedule. ``checkpoint_every`` counts barriers, four per iteration;
    a checkpoint is written at the end of the iteration that reaches or passes
    each multiple.
    """

    iterations: int = 5000
    burn_in: int = 2000
    lag: int = 20
    seed: int = 0
    log_every: int = 100
    checkpoint_every: int = 50
    top_words: int = 7

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError(
                f"burn-in must satisfy 0 <= burn-in < iterations, got {self.burn_in} and {self.iterations}"
            )
        if self.lag < 1:
            raise ValueError("lag must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.log_every < 1 or self.checkpoint_every < 1:
            raise ValueError("log_every and checkpoint_every must be at least 1")
        if self.top_words < 1:
            raise ValueError("top_words must be at least 1")

    def collects(self, iteration: int) -> bool:
        return iteration > self.burn_in and (iteration - self.burn_in) % self.lag == 0

    def checkpoint_due(self, iteration: int) -> bool:
        reached = iteration * BARRIERS_PER_ITERATION // self.checkpoint_every
        return reached > (iteration - 1) * BARRIERS_PER_ITERATION // self.checkpoint_every

    @property
    def expected_samples(self) -> int:
        return (self.iterations - self.burn_in) // self.lag

    def as_dict(self) -> Dict[str, int]:
        return {
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "lag": self.lag,
            "seed": self.seed,
            "top_words": self.top_words,
        }


@dataclass(frozen=True)
class ChainSample:
    """One collected hierarchy with its diagnostics and per-node top words."""

    iteration: int
    log_likelihood: float
    average_depth: float
    parent: Tuple[int, ...]
    top_words: Dict[int, List[Tuple[int, int]]] = field(default_factory=dict, compare=False)

    def hierarchy(self, root: int) -> Hierarchy:
        return Hierarchy(self.parent, root)

    def to_payload(self) -> Dict:
        return {
            "iteration": self.iteration,
            "log_likelihood": self.log_likelihood,
            "average_depth": self.average_depth,
            "parent": [None if parent == NO_PARENT else parent for parent in self.parent],
            "top_words": {str(node): [list(pair) for pair in pairs] for node, pairs in self.top_words.items()},
        }

    @classmethod
    def from_payload(cls, payload: Dict) -> "ChainSample":
        return cls(
            iteration=int(payload["iteration"]),
            log_likelihood=float(payload["log_likelihood"]),
            average_depth=float(payload["average_depth"]),
            parent=tuple(NO_PARENT if value is None else int(value) for value in payload["parent"]),
            top_words={
                int(node): [(int(word), int(count)) for word, count in pairs]
                for node, pairs in payload.get("top_words", {}).items()
            },
        )


@dataclass
class ChainResult:
    samples: List[ChainSample]
    diagnostics: pd.DataFrame
    state: SamplerState

    @property
    def best_sample(self) -> Optional[ChainSample]:
        """Collected sample with the highest log likelihood (earliest on ties)."""
        if not self.samples:
            return None
        return max(self.samples, key=lambda sample: (sample.log_likelihood, -sample.iteration))

    def map_hierarchy(self) -> Hierarchy:
        return map_hierarchy(self.samples, self.state.graph)


class DiagnosticsLog:
    """Diagnostics CSV that grows by one row per iteration."""

    FLOAT_FORMAT = "%.10g"

    def __init__(self, path: Path, rows: Sequence[Tuple[int, float, float]] = ()) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        diagnostics_frame(rows).to_csv(self.path, index=False, float_format=self.FLOAT_FORMAT)

    def append(self, row: Tuple[int, float, float]) -> None:
        diagnostics_frame([row]).to_csv(
            self.path, mode="a", header=False, index=False, float_format=self.FLOAT_FORMAT
        )


def diagnostics_frame(rows: Sequence[Tuple[int, float, float]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=DIAGNOSTIC_COLUMNS)


def gibbs_iteration(state: SamplerState) -> SamplerState:
    """Resample every non-root path in ascending id order, then every token level."""
    hierarchy = state.hierarchy
    for doc in range(len(hierarchy)):
        if doc != hierarchy.root:
            sample_path(state, doc, state.rng)
    for doc in range(len(hierarchy)):
        sample_document_levels(state, doc, state.rng)
    return state


def snapshot(state: SamplerState, iteration: int, top_words: int) -> ChainSample:
    return ChainSample(
        iteration=iteration,
        log_likelihood=log_likelihood(state),
        average_depth=state.hierarchy.average_depth(),
        parent=tuple(state.hierarchy.parent),
        top_words={
            node: top_word_ids(state.counts, node, top_words) for node in range(len(state.hierarchy))
        },
    )


def run_gibbs(
    graph: DocumentGraph,
    hp: Hyperparameters,
    config: GibbsConfig,
    *,
    parallel: Optional[ParallelConfig] = None,
    vocabulary_size: Optional[int] = None,
    checkpoint_dir: Optional[Path] = None,
    resume_from: Optional[Path] = None,
    on_sample: Optional[Callable[[ChainSample], None]] = None,
    diagnostics_path: Optional[Path] = None,
) -> ChainResult:
    """Run a chain and collect a sample every ``lag`` iterations after burn-in.

    With ``parallel`` set to more than one worker the iterations run on the
    bulk-synchronous sampler; one worker reproduces the serial chain exactly.
    With ``diagnostics_path`` every iteration's row is appended to that CSV as
    soon as it is computed; on resume the file restarts from the checkpoint.
    """
    if resume_from is not None:
        state, start, samples, rows = load_checkpoint(resume_from, graph, hp, vocabulary_size)
        logger.info("Resuming chain from %s at iteration %d", resume_from, start)
    else:
        state = init_state(graph, hp, config.seed, vocabulary_size=vocabulary_size)
        start, samples, rows = 0, [], []
    diagnostics_log = DiagnosticsLog(diagnostics_path, rows) if diagnostics_path is not None else None

    sampler = ParallelSampler(parallel) if parallel is not None else None
    try:
        for iteration in range(start + 1, config.iterations + 1):
            if sampler is not None:
                sampler.iteration(state, iteration)
            else:
                gibbs_iteration(state)

            collect = config.collects(iteration)
            sample = snapshot(state, iteration, config.top_words) if collect else None
            likelihood = sample.log_likelihood if sample else log_likelihood(state)
            depth = state.hierarchy.average_depth()
            rows.append((iteration, likelihood, depth))
            if diagnostics_log is not None:
                diagnostics_log.append(rows[-1])

            if sample is not None:
                samples.append(sample)
                if on_sample is not None:
                    on_sample(sample)

            if iteration % config.log_every == 0 or iteration == config.iterations:
                logger.info(
                    "Iteration %d/%d: log likelihood %.3f, average depth %.3f, %d sample(s)",
                    iteration,
                    config.iterations,
                    likelihood,
                    depth,
                    len(samples),
                )
            if checkpoint_dir is not None and config.checkpoint_due(iteration):
                written = save_checkpoint(
                    Path(checkpoint_dir) / checkpoint_name(iteration), state, iteration, samples, rows
                )
                prune_checkpoints(written)
    finally:
        if sampler is not None:
            if sampler.stats.rejected_moves:
                logger.warning("Parallel sampler rejected %d cycle-closing move(s)", sampler.stats.rejected_moves)
            sampler.close()

    return ChainResult(samples=samples, diagnostics=diagnostics_frame(rows), state=state)


def parent_frequencies(samples: Sequence[ChainSample]) -> List[Counter]:
    """Per node, how often each parent was sampled."""
    if not samples:
        raise ValueError("at least one sample is required")
    frequencies: List[Counter] = [Counter() for _ in samples[0].parent]
    for sample in samples:
        for node, parent in enumerate(sample.parent):
            if parent != NO_PARENT:
                frequencies[node][parent] += 1
    return frequencies


def map_hierarchy(samples: Sequence[ChainSample], graph: DocumentGraph) -> Hierarchy:
    """Modal parent per node, ties to the lowest id, repaired into a tree.

    A node on a cycle of modal parents takes its most frequent parent that
    is already anchored; failing that, the breadth-first parent. Nodes below
    a cycle keep their modal parent.
    """
    frequencies = parent_frequencies(samples)
    ranked = {
        node: [parent for parent, _ in sorted(counter.items(), key=lambda item: (-item[1], item[0]))]
        for node, counter in enumerate(frequencies)
        if counter
    }
    parents = [ranked[node][0] if node in ranked else NO_PARENT for node in range(graph.num_nodes)]
    parents[graph.root] = NO_PARENT

    hierarchy = repair_to_tree(parents, graph.root, ranked.items(), bfs_hierarchy(graph))
    hierarchy.validate(graph)
    repaired = sum(1 for node, parent in enumerate(hierarchy.parent) if parent != parents[node])
    if repaired:
        logger.warning("MAP hierarchy needed %d repair(s) to form a tree", repaired)
    return hierarchy


def checkpoint_name(iteration: int) -> str:
    return f"checkpoint-{iteration:08d}.json"


def prune_checkpoints(keep: Path) -> None:
    """Remove every checkpoint in the directory of ``keep`` except ``keep``."""
    for path in Path(keep).parent.glob("checkpoint-*.json"):
        if path != keep:
            path.unlink()


def latest_checkpoint(directory: Path) -> Optional[Path]:
    candidates = sorted(Path(directory).glob("checkpoint-*.json"))
    return candidates[-1] if candidates else None


def save_checkpoint(
    path: Path,
    state: SamplerState,
    iteration: int,
    samples: Sequence[ChainSample],
    rows: Sequence[Tuple[int, float, float]],
) -> Path:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "iteration": iteration,
        "seed": state.seed,
        "hyperparameters": state.hp.as_dict(),
        "vocabulary_size": state.vocabulary_size,
        "parent": list(state.hierarchy.parent),
        "levels": [row.tolist() for row in state.levels],
        "rng": state.rng.bit_generator.state,
        "samples": [sample.to_payload() for sample in samples],
        "diagnostics": [list(row) for row in rows],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_suffix(".tmp")
    partial.write_text(json.dumps(payload), encoding="utf-8")
    partial.replace(path)
    logger.debug("Checkpoint written to %s", path)
    return path


def load_checkpoint(
    path: Path,
    graph: DocumentGraph,
    hp: Hyperparameters,
    vocabulary_size: Optional[int] = None,
) -> Tuple[SamplerState, int, List[ChainSample], List[Tuple[int, float, float]]]:
    """Rebuild a sampler state from a checkpoint file.

    Raises:
        ValueError: If the file is not a compatible checkpoint for ``graph``.
    """
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != CHECKPOINT_FORMAT or payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path} is not a version {CHECKPOINT_VERSION} checkpoint")
    if len(payload["parent"]) != graph.num_nodes:
        raise ValueError(f"checkpoint has {len(payload['parent'])} nodes, graph has {graph.num_nodes}")
    if Hyperparameters(**payload["hyperparameters"]) != hp:
        raise ValueError("checkpoint was written with different hyperparameters")

    state = init_state(
        graph,
        hp,
        int(payload["seed"]),
        vocabulary_size=vocabulary_size or int(payload["vocabulary_size"]),
    )
    state.hierarchy = Hierarchy.from_parents(payload["parent"], graph.root)
    state.hierarchy.validate(graph)
    state.levels = [np.asarray(row, dtype=np.int64) for row in payload["levels"]]
    state.counts = recount(state)
    state.rng.bit_generator.state = payload["rng"]

    samples = [ChainSample.from_payload(item) for item in payload["samples"]]
    rows = [(int(row[0]), float(row[1]), float(row[2])) for row in payload["diagnostics"]]
    return state, int(payload["iteration"]), samples, rows


__all__ = [
    "ChainResult",
    "ChainSample",
    "DiagnosticsLog",
    "GibbsConfig",
    "gibbs_iteration",
    "latest_checkpoint",
    "load_checkpoint",
    "map_hierarchy",
    "parent_frequencies",
    "run_gibbs",
    "save_checkpoint",
]
