import json
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import pytest

from doctree.services.corpus import DocumentGraph, Vocabulary, build_graph
from doctree.services.hdtm import Hyperparameters, SamplerState, init_state


def make_graph(
    documents: Dict[str, Sequence[str]],
    edges: Sequence[Tuple[str, str]],
    root: str = "a",
    **kwargs,
) -> Tuple[DocumentGraph, Vocabulary]:
    return build_graph(documents, edges, root, **kwargs)


@pytest.fixture
def diamond() -> Tuple[DocumentGraph, Vocabulary]:
    """a -> b, a -> c, b -> d, c -> d (ids 0..3 in that order)."""
    documents = {
        "a": ["root", "root", "common"],
        "b": ["sports", "ball", "common"],
        "c": ["science", "atom", "common"],
        "d": ["ball", "atom", "match"],
    }
    edges = [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")]
    return make_graph(documents, edges)


@pytest.fixture
def chain_graph() -> Tuple[DocumentGraph, Vocabulary]:
    """a -> b -> c plus the shortcut a -> c."""
    documents = {
        "a": ["x", "y"],
        "b": ["y", "z"],
        "c": ["z", "z", "x"],
    }
    edges = [("a", "b"), ("b", "c"), ("a", "c")]
    return make_graph(documents, edges)


@pytest.fixture
def small_web() -> Tuple[DocumentGraph, Vocabulary]:
    """Six pages with several alternative parents per page."""
    documents = {
        "a": ["home", "portal", "news"],
        "b": ["sport", "team", "news"],
        "c": ["science", "lab", "news"],
        "d": ["team", "goal", "ball"],
        "e": ["lab", "atom", "cell"],
        "f": ["ball", "cell", "goal", "atom"],
    }
    edges = [
        ("a", "b"),
        ("a", "c"),
        ("a", "d"),
        ("b", "d"),
        ("c", "e"),
        ("b", "e"),
        ("d", "f"),
        ("e", "f"),
        ("a", "f"),
    ]
    return make_graph(documents, edges)


@pytest.fixture
def hp() -> Hyperparameters:
    return Hyperparameters(gamma=0.5, eta=0.1, alpha=1.0)


@pytest.fixture
def web_state(small_web, hp) -> SamplerState:
    graph, vocabulary = small_web
    return init_state(graph, hp, seed=7, vocabulary_size=vocabulary.size)


def write_lines(path: Path, lines: List[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_json_lines(path: Path, records: List[dict]) -> Path:
    return write_lines(path, [json.dumps(record) for record in records])


@pytest.fixture
def raw_corpus(tmp_path: Path) -> Dict[str, Path]:
    """Edge, document and redirect files for the ingest command."""
    edges = write_lines(
        tmp_path / "edges.tsv",
        [
            "# source\ttarget",
            "home\tsports",
            "home\tscience",
            "sports\tfootball",
            "science\tfootball",
            "home\told-science",
            "sports\tmissing-page",
            "island\thome",
        ],
    )
    documents = write_json_lines(
        tmp_path / "documents.jsonl",
        [
            {"id": "home", "title": "Home", "text": "Welcome home, news and portal", "categories": ["Main"]},
            {"id": "sports", "title": "Sports", "text": "Sports teams and ball games", "categories": ["Sport"]},
            {"id": "science", "title": "Science", "text": "Science labs, atoms and cells", "categories": ["Science"]},
            {
                "id": "football",
                "title": "Football",
                "text": "Football: a ball game for teams",
                "categories": ["Sport", "Ball games"],
            },
            {"id": "old-science", "title": "Old science", "text": "moved", "categories": []},
            {"id": "island", "title": "Island", "text": "unreachable page", "categories": []},
        ],
    )
    redirects = write_lines(tmp_path / "redirects.tsv", ["old-science\tscience"])
    return {"edges": edges, "documents": documents, "redirects": redirects}
