"""Document graph ingestion and preprocessing.

Turns an edge file plus a JSON-lines document file into an immutable
:class:`DocumentGraph` with dense integer ids and a :class:`Vocabulary`.
Redirect resolution and root-component extraction rebuild the graph and
re-densify ids so that runs stay reproducible across machines.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from doctree.common import CorpusError, RedirectCycleError, get_logger

logger = get_logger("services.corpus")

GRAPH_FORMAT = "doctree-graph"
GRAPH_FORMAT_VERSION = 1

_TOKEN_PATTERN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> List[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN_PATTERN.findall(text.lower())


@dataclass(frozen=True)
class NodeRecord:
    external_id: str
    title: str
    tokens: Tuple[int, ...]
    categories: FrozenSet[str] = frozenset()


@dataclass(frozen=True)
class Vocabulary:
    """Word <-> id bijection."""

    words: Tuple[str, ...]

    @cached_property
    def index(self) -> Dict[str, int]:
        return {word: word_id for word_id, word in enumerate(self.words)}

    @property
    def size(self) -> int:
        return len(self.words)

    def word(self, word_id: int) -> str:
        return self.words[word_id]

    def id_of(self, word: str) -> int:
        return self.index[word]


@dataclass(frozen=True)
class DocumentGraph:
    """Immutable rooted directed graph whose nodes carry token sequences."""

    nodes: Tuple[NodeRecord, ...]
    edges: Tuple[Tuple[int, int], ...]
    root: int

    def __post_init__(self) -> None:
        if not 0 <= self.root < len(self.nodes):
            raise CorpusError(f"root id {self.root} is not a node of the graph")

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def successors(self) -> Tuple[Tuple[int, ...], ...]:
        outgoing: List[List[int]] = [[] for _ in self.nodes]
        for source, target in self.edges:
            outgoing[source].append(target)
        return tuple(tuple(sorted(targets)) for targets in outgoing)

    @cached_property
    def predecessors(self) -> Tuple[Tuple[int, ...], ...]:
        incoming: List[List[int]] = [[] for _ in self.nodes]
        for source, target in self.edges:
            incoming[target].append(source)
        return tuple(tuple(sorted(sources)) for sources in incoming)

    @cached_property
    def edge_set(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset(self.edges)

    def has_edge(self, source: int, target: int) -> bool:
        return (source, target) in self.edge_set

    def in_degree(self, node: int) -> int:
        return len(self.predecessors[node])

    @cached_property
    def external_index(self) -> Dict[str, int]:
        return {record.external_id: node_id for node_id, record in enumerate(self.nodes)}

    @property
    def total_tokens(self) -> int:
        return sum(len(record.tokens) for record in self.nodes)

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.num_nodes))
        graph.add_edges_from(self.edges)
        return graph


@dataclass
class IngestReport:
    """Counters collected while building or preprocessing a graph."""

    documents: int = 0
    edges: int = 0
    dropped_edges: int = 0
    self_loops: int = 0
    duplicate_edges: int = 0
    redirected_edges: int = 0
    removed_redirect_nodes: int = 0
    dropped_nodes: int = 0
    total_tokens: int = 0
    vocabulary_size: int = 0
    warnings: List[str] = field(default_factory=list)

    def as_dict(self) -> Dict[str, object]:
        return {
            "documents": self.documents,
            "edges": self.edges,
            "dropped_edges": self.dropped_edges,
            "self_loops": self.self_loops,
            "duplicate_edges": self.duplicate_edges,
            "redirected_edges": self.redirected_edges,
            "removed_redirect_nodes": self.removed_redirect_nodes,
            "dropped_nodes": self.dropped_nodes,
            "total_tokens": self.total_tokens,
            "vocabulary_size": self.vocabulary_size,
        }


@dataclass(frozen=True)
class _RawDocument:
    external_id: str
    title: str
    words: Tuple[str, ...]
    categories: FrozenSet[str]


def _iter_data_lines(path: Path) -> Iterator[Tuple[int, str]]:
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_number, raw_line in enumerate(handle, start=1):
            line = raw_line.strip()
            if not line or line.startswith("#"):
                continue
            yield line_number, line


def _read_pairs(path: Path, kind: str) -> List[Tuple[str, str]]:
    pairs: List[Tuple[str, str]] = []
    for line_number, line in _iter_data_lines(path):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise CorpusError(f"{path}:{line_number}: expected '<source>\\t<target>' in {kind} file")
        pairs.append((parts[0].strip(), parts[1].strip()))
    return pairs


def _read_documents(path: Path) -> Dict[str, _RawDocument]:
    documents: Dict[str, _RawDocument] = {}
    for line_number, line in _iter_data_lines(path):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}:{line_number}: invalid JSON ({exc.msg})") from exc

        external_id = record.get("id")
        if not isinstance(external_id, str) or not external_id:
            raise CorpusError(f"{path}:{line_number}: document without a string 'id'")
        if external_id in documents:
            raise CorpusError(f"duplicate node: {external_id}")

        categories = record.get("categories") or []
        if not isinstance(categories, list):
            raise CorpusError(f"{path}:{line_number}: 'categories' must be an array")

        documents[external_id] = _RawDocument(
            external_id=external_id,
            title=str(record.get("title", "")),
            words=tuple(tokenize(str(record.get("text", "")))),
            categories=frozenset(str(category) for category in categories),
        )
    return documents


def _build_graph(
    records: Mapping[str, Tuple[str, Tuple[int, ...], FrozenSet[str]]],
    edges: Iterable[Tuple[str, str]],
    root: str,
    report: IngestReport,
) -> DocumentGraph:
    """Assign dense ids by sorted external id and collapse the edge list."""
    ordered_ids = sorted(records)
    index = {external_id: node_id for node_id, external_id in enumerate(ordered_ids)}
    if root not in index:
        raise CorpusError(f"root {root!r} does not appear in the document file")

    nodes = tuple(
        NodeRecord(
            external_id=external_id,
            title=records[external_id][0],
            tokens=records[external_id][1],
            categories=records[external_id][2],
        )
        for external_id in ordered_ids
    )

    dense_edges = set()
    for source, target in edges:
        if source not in index or target not in index:
            report.dropped_edges += 1
            continue
        if source == target:
            report.self_loops += 1
            continue
        pair = (index[source], index[target])
        if pair in dense_edges:
            report.duplicate_edges += 1
            continue
        dense_edges.add(pair)

    graph = DocumentGraph(nodes=nodes, edges=tuple(sorted(dense_edges)), root=index[root])
    report.documents = graph.num_nodes
    report.edges = len(graph.edges)
    report.total_tokens = graph.total_tokens
    return graph


def _records_of(graph: DocumentGraph) -> Dict[str, Tuple[str, Tuple[int, ...], FrozenSet[str]]]:
    return {
        record.external_id: (record.title, record.tokens, record.categories)
        for record in graph.nodes
    }


def _external_edges(graph: DocumentGraph) -> List[Tuple[str, str]]:
    return [
        (graph.nodes[source].external_id, graph.nodes[target].external_id)
        for source, target in graph.edges
    ]


def load_graph(
    edge_path: Path,
    document_path: Path,
    root: str,
) -> Tuple[DocumentGraph, Vocabulary, IngestReport]:
    """Load a document graph and its vocabulary from disk.

    Args:
        edge_path: ``source<TAB>target`` lines, ``#`` comments allowed.
        document_path: JSON lines with ``id``, ``title``, ``text`` and optional ``categories``.
        root: External id of the root document.

    Returns:
        Tuple of the dense-id graph, the vocabulary and the ingestion counters.

    Raises:
        CorpusError: On malformed files, a duplicate node or a missing root.
    """
    report = IngestReport()
    documents = _read_documents(document_path)
    if root not in documents:
        raise CorpusError(f"root {root!r} does not appear in the document file")

    vocabulary = Vocabulary(
        words=tuple(sorted({word for document in documents.values() for word in document.words}))
    )
    records = {
        external_id: (
            document.title,
            tuple(vocabulary.index[word] for word in document.words),
            document.categories,
        )
        for external_id, document in documents.items()
    }

    graph = _build_graph(records, _read_pairs(edge_path, "edge"), root, report)
    report.vocabulary_size = vocabulary.size

    if report.dropped_edges:
        message = f"{report.dropped_edges} edge(s) reference documents absent from {document_path}"
        report.warnings.append(message)
        logger.warning("Dropped edges: %s", message)

    logger.info(
        "Loaded graph with %d documents, %d edges, %d tokens, vocabulary %d",
        graph.num_nodes,
        len(graph.edges),
        report.total_tokens,
        vocabulary.size,
    )
    return graph, vocabulary, report


def load_redirects(path: Path) -> List[Tuple[str, str]]:
    """Read a ``from<TAB>to`` redirect file."""
    return _read_pairs(path, "redirect")


def _close_redirects(redirects: Sequence[Tuple[str, str]]) -> Dict[str, str]:
    """Map every redirect source to its final target, rejecting cycles."""
    direct: Dict[str, str] = {}
    for source, target in redirects:
        if direct.get(source, target) != target:
            raise CorpusError(f"redirect {source!r} points to both {direct[source]!r} and {target!r}")
        direct[source] = target

    final: Dict[str, str] = {}
    for start in direct:
        chain = [start]
        seen = {start}
        current = direct[start]
        while current in direct and current not in final:
            if current in seen:
                cycle_start = chain.index(current)
                raise RedirectCycleError(chain[cycle_start:] + [current])
            chain.append(current)
            seen.add(current)
            current = direct[current]
        resolved = final.get(current, current)
        for member in chain:
            final[member] = resolved
    return final


def resolve_redirects(
    graph: DocumentGraph,
    redirects: Sequence[Tuple[str, str]],
    report: Optional[IngestReport] = None,
) -> DocumentGraph:
    """Point edges aimed at redirect pages to the final target and drop redirect nodes.

    Raises:
        RedirectCycleError: If the redirect map contains a cycle.
    """
    report = report if report is not None else IngestReport()
    if not redirects:
        return graph

    final = _close_redirects(redirects)
    root_external = graph.nodes[graph.root].external_id
    root_external = final.get(root_external, root_external)

    records = {
        external_id: value
        for external_id, value in _records_of(graph).items()
        if external_id not in final
    }
    report.removed_redirect_nodes = graph.num_nodes - len(records)

    rewritten: List[Tuple[str, str]] = []
    for source, target in _external_edges(graph):
        if source in final:
            continue
        if target in final:
            target = final[target]
            report.redirected_edges += 1
        rewritten.append((source, target))

    resolved = _build_graph(records, rewritten, root_external, report)
    logger.info(
        "Resolved redirects: %d edge(s) rewritten, %d redirect node(s) removed",
        report.redirected_edges,
        report.removed_redirect_nodes,
    )
    return resolved


def extract_root_component(
    graph: DocumentGraph,
    report: Optional[IngestReport] = None,
) -> DocumentGraph:
    """Keep only the nodes reachable from the root along directed edges."""
    report = report if report is not None else IngestReport()
    reachable = nx.descendants(graph.to_networkx(), graph.root) | {graph.root}
    dropped = graph.num_nodes - len(reachable)
    report.dropped_nodes = dropped
    if not dropped:
        logger.info("Root component covers the whole graph (%d nodes)", graph.num_nodes)
        return graph

    keep = {graph.nodes[node_id].external_id for node_id in reachable}
    records = {
        external_id: value
        for external_id, value in _records_of(graph).items()
        if external_id in keep
    }
    edges = [
        (source, target)
        for source, target in _external_edges(graph)
        if source in keep and target in keep
    ]
    component = _build_graph(records, edges, graph.nodes[graph.root].external_id, IngestReport())
    logger.info("Dropped %d node(s) unreachable from the root", dropped)
    return component


def token_counts(graph: DocumentGraph) -> List[Counter]:
    """Word frequency table per node."""
    return [Counter(record.tokens) for record in graph.nodes]


def graph_to_payload(graph: DocumentGraph, vocabulary: Vocabulary) -> Dict[str, object]:
    return {
        "format": GRAPH_FORMAT,
        "version": GRAPH_FORMAT_VERSION,
        "root": graph.root,
        "vocabulary": list(vocabulary.words),
        "nodes": [
            {
                "id": record.external_id,
                "title": record.title,
                "tokens": list(record.tokens),
                "categories": sorted(record.categories),
            }
            for record in graph.nodes
        ],
        "edges": [list(edge) for edge in graph.edges],
    }


def save_graph(graph: DocumentGraph, vocabulary: Vocabulary, path: Path) -> None:
    """Write the versioned JSON container. Equal graphs produce equal bytes."""
    payload = graph_to_payload(graph, vocabulary)
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def read_graph(path: Path) -> Tuple[DocumentGraph, Vocabulary]:
    """Read a container written by :func:`save_graph`."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: not a serialized graph ({exc.msg})") from exc

    if payload.get("format") != GRAPH_FORMAT:
        raise CorpusError(f"{path}: unknown container format {payload.get('format')!r}")
    if payload.get("version") != GRAPH_FORMAT_VERSION:
        raise CorpusError(f"{path}: unsupported container version {payload.get('version')!r}")

    vocabulary = Vocabulary(words=tuple(payload["vocabulary"]))
    nodes = tuple(
        NodeRecord(
            external_id=node["id"],
            title=node["title"],
            tokens=tuple(node["tokens"]),
            categories=frozenset(node["categories"]),
        )
        for node in payload["nodes"]
    )
    for record in nodes:
        if any(word_id >= vocabulary.size for word_id in record.tokens):
            raise CorpusError(f"{path}: node {record.external_id} has a word id outside the vocabulary")

    graph = DocumentGraph(
        nodes=nodes,
        edges=tuple(tuple(edge) for edge in payload["edges"]),
        root=int(payload["root"]),
    )
    return graph, vocabulary


def build_graph(
    documents: Mapping[str, Sequence[str]],
    edges: Iterable[Tuple[str, str]],
    root: str,
    *,
    titles: Optional[Mapping[str, str]] = None,
    categories: Optional[Mapping[str, Iterable[str]]] = None,
) -> Tuple[DocumentGraph, Vocabulary]:
    """Build a graph in memory from already-tokenized documents."""
    vocabulary = Vocabulary(
        words=tuple(sorted({word for words in documents.values() for word in words}))
    )
    titles = titles or {}
    categories = categories or {}
    records = {
        external_id: (
            titles.get(external_id, external_id),
            tuple(vocabulary.index[word] for word in words),
            frozenset(categories.get(external_id, ())),
        )
        for external_id, words in documents.items()
    }
    graph = _build_graph(records, edges, root, IngestReport())
    return graph, vocabulary
