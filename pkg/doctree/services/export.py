"""Writers for chain outputs: per-sample JSON, MAP JSON and DOT."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import networkx as nx
from networkx.drawing.nx_pydot import write_dot

from doctree.common import get_logger
from doctree.services.chain import ChainSample
from doctree.services.corpus import DocumentGraph, Vocabulary
from doctree.services.hdtm import CountTables, Hyperparameters, top_word_ids
from doctree.services.hierarchy import NO_PARENT, Hierarchy

logger = get_logger("services.export")

SAMPLES_DIRNAME = "samples"


@dataclass(frozen=True)
class ExportConfig:
    top_words: int = 7

    def __post_init__(self) -> None:
        if self.top_words < 1:
            raise ValueError("top_words must be at least 1")


def smoothed_probability(count: int, total: int, hp: Hyperparameters, vocabulary_size: int) -> float:
    return (count + hp.eta) / (total + vocabulary_size * hp.eta)


def node_top_words(
    counts: CountTables,
    vocabulary: Vocabulary,
    hp: Hyperparameters,
    limit: int,
) -> Dict[int, List[Dict[str, object]]]:
    """Top words per node with counts and smoothed probabilities."""
    result: Dict[int, List[Dict[str, object]]] = {}
    for node in range(len(counts.node_word)):
        total = int(counts.node_total[node])
        result[node] = [
            {
                "word": vocabulary.word(word),
                "count": count,
                "probability": smoothed_probability(count, total, hp, vocabulary.size),
            }
            for word, count in top_word_ids(counts, node, limit)
        ]
    return result


def sample_payload(sample: ChainSample, vocabulary: Vocabulary) -> Dict[str, object]:
    payload = sample.to_payload()
    payload["top_words"] = {
        str(node): [[vocabulary.word(word), count] for word, count in pairs]
        for node, pairs in sorted(sample.top_words.items())
    }
    return payload


def write_sample(sample: ChainSample, vocabulary: Vocabulary, directory: Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"sample-{sample.iteration:08d}.json"
    path.write_text(json.dumps(sample_payload(sample, vocabulary), sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_samples(directory: Path) -> List[ChainSample]:
    """Load every ``sample-*.json`` file in iteration order; words stay as strings."""
    samples = []
    for path in sorted(Path(directory).glob("sample-*.json")):
        payload = json.loads(path.read_text(encoding="utf-8"))
        payload["top_words"] = {}
        samples.append(ChainSample.from_payload(payload))
    if not samples:
        raise ValueError(f"no sample files found in {directory}")
    return samples


def hierarchy_payload(
    hierarchy: Hierarchy,
    graph: DocumentGraph,
    top_words: Optional[Dict[int, List[Dict[str, object]]]] = None,
) -> Dict[str, object]:
    nodes = []
    for node, record in enumerate(graph.nodes):
        parent = hierarchy.parent[node]
        entry = {
            "node": node,
            "id": record.external_id,
            "title": record.title,
            "parent": None if parent == NO_PARENT else parent,
            "depth": hierarchy.depth[node],
        }
        if top_words is not None:
            entry["top_words"] = top_words.get(node, [])
        nodes.append(entry)
    return {
        "root": hierarchy.root,
        "parent": [None if parent == NO_PARENT else parent for parent in hierarchy.parent],
        "average_depth": hierarchy.average_depth(),
        "nodes": nodes,
    }


def write_hierarchy_json(payload: Dict[str, object], path: Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def read_hierarchy_json(path: Path) -> Hierarchy:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return Hierarchy.from_parents(payload["parent"], int(payload["root"]))


def hierarchy_dot(
    hierarchy: Hierarchy,
    graph: DocumentGraph,
    top_words: Optional[Dict[int, List[Dict[str, object]]]] = None,
    label_words: int = 3,
) -> nx.DiGraph:
    tree = nx.DiGraph()
    for node, record in enumerate(graph.nodes):
        words = [entry["word"] for entry in (top_words or {}).get(node, [])[:label_words]]
        label = record.title if not words else f"{record.title}\\n{' '.join(words)}"
        tree.add_node(f"n{node}", label=json.dumps(label, ensure_ascii=False))
    for parent, node in hierarchy.edges():
        tree.add_edge(f"n{parent}", f"n{node}")
    return tree


def export_map(
    hierarchy: Hierarchy,
    graph: DocumentGraph,
    counts: Optional[CountTables],
    vocabulary: Vocabulary,
    hp: Hyperparameters,
    directory: Path,
    config: ExportConfig = ExportConfig(),
    stem: str = "map",
) -> Tuple[Path, Path]:
    """Write ``<stem>.json`` and ``<stem>.dot`` for a hierarchy."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    top_words = node_top_words(counts, vocabulary, hp, config.top_words) if counts is not None else None
    json_path = write_hierarchy_json(hierarchy_payload(hierarchy, graph, top_words), directory / f"{stem}.json")
    dot_path = directory / f"{stem}.dot"
    write_dot(hierarchy_dot(hierarchy, graph, top_words), str(dot_path))
    logger.info("Exported %s hierarchy to %s and %s", stem, json_path, dot_path)
    return json_path, dot_path


__all__ = [
    "ExportConfig",
    "export_map",
    "hierarchy_payload",
    "node_top_words",
    "read_hierarchy_json",
    "read_samples",
    "write_sample",
]
