"""Hierarchy quality metrics: parent certainty, category Jaccard and model precision."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import AbstractSet, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from doctree.common import get_logger
from doctree.services.chain import ChainSample, map_hierarchy, parent_frequencies
from doctree.services.corpus import DocumentGraph
from doctree.services.hierarchy import Hierarchy

logger = get_logger("services.evaluation")

CERTAINTY_BINS = 10


def certainty_score(samples: int, parent_samples: int, in_degree: int) -> float:
    """Normalized margin of the final parent over a uniformly guessed parent.

    ``((n_p/n) - 1/in_degree) / (n_p/n)``, floored at 0. A parent that was
    never sampled scores 0.

    Raises:
        ValueError: If ``samples`` or ``in_degree`` is not positive.
    """
    if samples <= 0:
        raise ValueError("certainty needs at least one sample")
    if in_degree <= 0:
        raise ValueError("certainty needs a positive in-degree")
    if parent_samples <= 0:
        return 0.0
    share = parent_samples / samples
    return max(0.0, (share - 1.0 / in_degree) / share)


def certainty_bin(value: float, bins: int = CERTAINTY_BINS) -> int:
    return min(int(value * bins), bins - 1)


@dataclass(frozen=True)
class NodeCertainty:
    node: int
    parent: int
    samples: int
    parent_samples: int
    in_degree: int
    certainty: float


@dataclass
class CertaintyReport:
    nodes: List[NodeCertainty]

    def by_node(self) -> Dict[int, float]:
        return {entry.node: entry.certainty for entry in self.nodes}

    def frame(self, graph: Optional[DocumentGraph] = None) -> pd.DataFrame:
        frame = pd.DataFrame(
            [
                {
                    "node": entry.node,
                    "parent": entry.parent,
                    "samples": entry.samples,
                    "parent_samples": entry.parent_samples,
                    "in_degree": entry.in_degree,
                    "certainty": entry.certainty,
                }
                for entry in self.nodes
            ],
            columns=["node", "parent", "samples", "parent_samples", "in_degree", "certainty"],
        )
        if graph is not None:
            frame.insert(1, "external_id", [graph.nodes[node].external_id for node in frame["node"]])
        return frame

    def histogram(self, bins: int = CERTAINTY_BINS) -> pd.DataFrame:
        """Probability density of certainty over ``bins`` equal bins of [0, 1]."""
        values = np.array([entry.certainty for entry in self.nodes], dtype=float)
        counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
        width = 1.0 / bins
        density = counts / (counts.sum() * width) if counts.sum() else np.zeros(bins)
        return pd.DataFrame(
            {"bin_start": edges[:-1], "bin_end": edges[1:], "count": counts, "density": density}
        )


def certainty(
    samples: Sequence[ChainSample],
    graph: DocumentGraph,
    hierarchy: Optional[Hierarchy] = None,
) -> CertaintyReport:
    """Certainty of every non-root node's final parent.

    The final parent comes from ``hierarchy`` when given, else from the MAP
    hierarchy of ``samples``.
    """
    frequencies = parent_frequencies(samples)
    final = hierarchy if hierarchy is not None else map_hierarchy(samples, graph)
    entries = []
    for node in range(graph.num_nodes):
        if node == graph.root:
            continue
        parent = final.parent[node]
        total = sum(frequencies[node].values())
        entries.append(
            NodeCertainty(
                node=node,
                parent=parent,
                samples=total,
                parent_samples=frequencies[node][parent],
                in_degree=graph.in_degree(node),
                certainty=certainty_score(total, frequencies[node][parent], graph.in_degree(node)),
            )
        )
    return CertaintyReport(entries)


def jaccard(first: AbstractSet[str], second: AbstractSet[str]) -> float:
    """|A ∩ B| / |A ∪ B|; two empty sets score 0."""
    union = len(first | second)
    if not union:
        return 0.0
    return len(first & second) / union


@dataclass(frozen=True)
class CategoryReference:
    """Category labels per document, keyed by external id."""

    categories: Mapping[str, FrozenSet[str]]

    def __contains__(self, external_id: object) -> bool:
        return external_id in self.categories

    def get(self, external_id: str) -> FrozenSet[str]:
        return self.categories.get(external_id, frozenset())

    @classmethod
    def from_graph(cls, graph: DocumentGraph) -> "CategoryReference":
        return cls({record.external_id: record.categories for record in graph.nodes if record.categories})


def load_reference(path: Path) -> CategoryReference:
    """Read ``{id, categories}`` JSON lines."""
    categories: Dict[str, FrozenSet[str]] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                categories[str(record["id"])] = frozenset(record.get("categories") or ())
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_number}: bad reference record ({exc})") from exc
    return CategoryReference(categories)


@dataclass
class JaccardReport:
    details: pd.DataFrame
    summary: pd.DataFrame
    skipped_missing: int = 0
    skipped_empty: int = 0

    @property
    def skipped(self) -> int:
        return self.skipped_missing + self.skipped_empty


def jaccard_vs_reference(
    hierarchy: Hierarchy,
    reference: CategoryReference,
    graph: DocumentGraph,
    certainty_report: Optional[CertaintyReport] = None,
    bins: int = CERTAINTY_BINS,
) -> JaccardReport:
    """Jaccard between each document's categories and the union over its ancestors.

    Documents absent from the reference or with no categories are skipped
    and counted. With a certainty report the summary is the mean and
    standard error per certainty bin, otherwise one overall row.
    """
    scores = certainty_report.by_node() if certainty_report is not None else {}
    rows = []
    skipped_missing = skipped_empty = 0
    for node in range(graph.num_nodes):
        if node == graph.root:
            continue
        external_id = graph.nodes[node].external_id
        if external_id not in reference:
            skipped_missing += 1
            continue
        own = reference.get(external_id)
        if not own:
            skipped_empty += 1
            continue
        ancestors: FrozenSet[str] = frozenset().union(
            *(reference.get(graph.nodes[ancestor].external_id) for ancestor in hierarchy.path(node)[:-1])
        )
        row = {"node": node, "external_id": external_id, "jaccard": jaccard(own, ancestors)}
        if node in scores:
            row["certainty"] = scores[node]
            row["bin"] = certainty_bin(scores[node], bins)
        rows.append(row)

    if skipped_missing or skipped_empty:
        logger.warning(
            "Jaccard skipped %d document(s) missing from the reference and %d with no categories",
            skipped_missing,
            skipped_empty,
        )

    details = pd.DataFrame(rows, columns=["node", "external_id", "jaccard", "certainty", "bin"])
    if certainty_report is not None and not details.empty:
        grouped = details.groupby("bin")["jaccard"]
        summary = pd.DataFrame(
            {"mean": grouped.mean(), "stderr": grouped.sem().fillna(0.0), "count": grouped.size()}
        ).reset_index()
        summary["bin_start"] = summary["bin"] / bins
    else:
        values = details["jaccard"]
        summary = pd.DataFrame(
            [
                {
                    "bin": "all",
                    "mean": float(values.mean()) if len(values) else math.nan,
                    "stderr": float(values.sem()) if len(values) > 1 else 0.0,
                    "count": int(len(values)),
                }
            ]
        )
    return JaccardReport(details, summary, skipped_missing, skipped_empty)


@dataclass(frozen=True)
class JudgmentTask:
    task_id: str
    presented: Tuple[str, ...]
    intruder: str
    selections: Tuple[str, ...]
    model: str = "model"

    def __post_init__(self) -> None:
        if self.intruder not in self.presented:
            raise ValueError(f"task {self.task_id}: intruder {self.intruder} is not among the presented ids")
        if not self.selections:
            raise ValueError(f"task {self.task_id}: at least one judge is required")


@dataclass(frozen=True)
class JudgmentSet:
    tasks: Tuple[JudgmentTask, ...] = field(default_factory=tuple)


def load_judgments(path: Path, model: Optional[str] = None) -> JudgmentSet:
    """Read ``{task_id, presented, intruder, selections}`` JSON lines.

    A ``model`` key per line labels the hierarchy the task came from;
    ``model`` overrides it for the whole file.
    """
    tasks = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                tasks.append(
                    JudgmentTask(
                        task_id=str(record["task_id"]),
                        presented=tuple(str(item) for item in record["presented"]),
                        intruder=str(record["intruder"]),
                        selections=tuple(str(item) for item in record["selections"]),
                        model=model or str(record.get("model", "model")),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_number}: bad judgment record ({exc})") from exc
    return JudgmentSet(tuple(tasks))


@dataclass
class PrecisionReport:
    per_task: pd.DataFrame
    summary: pd.DataFrame
    dropped: int = 0


def model_precision(judgments: JudgmentSet) -> PrecisionReport:
    """Fraction of judges who picked the planted intruder, per task.

    Selections outside the presented ids are dropped with a warning; a task
    left without any valid selection is excluded.
    """
    rows = []
    dropped = 0
    for task in judgments.tasks:
        presented = set(task.presented)
        valid = [selection for selection in task.selections if selection in presented]
        dropped += len(task.selections) - len(valid)
        if not valid:
            logger.warning("Task %s has no valid judgment left and is excluded", task.task_id)
            continue
        correct = sum(1 for selection in valid if selection == task.intruder)
        rows.append(
            {
                "model": task.model,
                "task_id": task.task_id,
                "judges": len(valid),
                "correct": correct,
                "precision": correct / len(valid),
            }
        )
    if dropped:
        logger.warning("Dropped %d judgment(s) naming a document that was not presented", dropped)

    per_task = pd.DataFrame(rows, columns=["model", "task_id", "judges", "correct", "precision"])
    grouped = per_task.groupby("model")["precision"]
    summary = pd.DataFrame(
        {
            "tasks": grouped.size(),
            "mean": grouped.mean(),
            "min": grouped.min(),
            "q1": grouped.quantile(0.25),
            "median": grouped.median(),
            "q3": grouped.quantile(0.75),
            "max": grouped.max(),
        }
    ).reset_index()
    return PrecisionReport(per_task, summary, dropped)


__all__ = [
    "CategoryReference",
    "CertaintyReport",
    "JaccardReport",
    "JudgmentSet",
    "JudgmentTask",
    "NodeCertainty",
    "PrecisionReport",
    "certainty",
    "certainty_score",
    "jaccard",
    "jaccard_vs_reference",
    "load_judgments",
    "load_reference",
    "model_precision",
]
