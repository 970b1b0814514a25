"""Document-intrusion tasks built from sibling groupings of a hierarchy."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from doctree.common import get_logger
from doctree.services.corpus import DocumentGraph
from doctree.services.hierarchy import Hierarchy

logger = get_logger("services.intrusion")

MIN_GROUPING = 4
MAX_MEMBERS = 7


@dataclass(frozen=True)
class IntrusionTask:
    task_id: str
    parent: int
    members: Tuple[int, ...]
    intruder: int
    presented: Tuple[int, ...]

    def to_record(self, graph: DocumentGraph, model: str) -> Dict[str, object]:
        return {
            "task_id": self.task_id,
            "model": model,
            "grouping_parent": graph.nodes[self.parent].external_id,
            "presented": [graph.nodes[node].external_id for node in self.presented],
            "titles": [graph.nodes[node].title for node in self.presented],
            "intruder": graph.nodes[self.intruder].external_id,
        }


def sibling_groupings(hierarchy: Hierarchy, min_size: int = MIN_GROUPING) -> Dict[int, Tuple[int, ...]]:
    """Children lists with at least ``min_size`` members, keyed by parent."""
    return {
        parent: tuple(children)
        for parent, children in enumerate(hierarchy.children)
        if len(children) >= min_size
    }


def generate_intrusion_tasks(
    hierarchy: Hierarchy,
    graph: DocumentGraph,
    count: int,
    rng: np.random.Generator,
    *,
    min_size: int = MIN_GROUPING,
    max_members: int = MAX_MEMBERS,
) -> List[IntrusionTask]:
    """Draw ``count`` tasks: up to ``max_members`` siblings plus one outsider, shuffled.

    A random node is picked and its sibling-inclusive grouping is used; picks
    whose grouping is smaller than ``min_size`` are thrown out and redrawn.

    Raises:
        ValueError: If no grouping is large enough or no outsider exists.
    """
    if count < 0:
        raise ValueError("task count must be non-negative")
    groupings = sibling_groupings(hierarchy, min_size)
    if not groupings:
        raise ValueError(f"no sibling grouping of size >= {min_size} exists")

    # a uniformly drawn node lands in an eligible grouping with this distribution
    eligible: List[int] = sorted(node for members in groupings.values() for node in members)
    tasks = []
    for index in range(count):
        pick = int(rng.choice(eligible))
        parent = hierarchy.parent[pick]
        grouping = groupings[parent]
        inside = set(grouping)
        outsiders = [node for node in range(len(hierarchy)) if node not in inside]
        if not outsiders:
            raise ValueError("every document belongs to the grouping; no intruder can be drawn")

        size = min(max_members, len(grouping))
        members = tuple(sorted(int(node) for node in rng.choice(grouping, size=size, replace=False)))
        intruder = int(rng.choice(outsiders))
        presented = tuple(int(node) for node in rng.permutation(members + (intruder,)))
        tasks.append(IntrusionTask(f"task-{index:04d}", parent, members, intruder, presented))

    logger.info("Generated %d intrusion task(s) from %d grouping(s)", len(tasks), len(groupings))
    return tasks


def write_tasks(tasks: Sequence[IntrusionTask], graph: DocumentGraph, path: Path, model: str = "model") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for task in tasks:
            handle.write(json.dumps(task.to_record(graph, model), ensure_ascii=False, sort_keys=True) + "\n")
    return path


__all__ = ["IntrusionTask", "generate_intrusion_tasks", "sibling_groupings", "write_tasks"]
