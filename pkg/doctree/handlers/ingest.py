"""``ingest``: raw edge and document files to a serialized document graph."""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from doctree.common import get_logger, log_command_invocation
from doctree.services.corpus import (
    extract_root_component,
    load_graph,
    load_redirects,
    resolve_redirects,
    save_graph,
)
from doctree.utils.digests import file_digest

logger = get_logger("handlers.ingest")


def run_ingest(args: argparse.Namespace) -> int:
    log_command_invocation(logger, "ingest", args)

    graph, vocabulary, report = load_graph(args.edges, args.documents, args.root)
    if args.redirects is not None:
        graph = resolve_redirects(graph, load_redirects(args.redirects), report)
    graph = extract_root_component(graph, report)
    report.documents = graph.num_nodes
    report.edges = len(graph.edges)
    report.total_tokens = graph.total_tokens

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_graph(graph, vocabulary, out)

    stats = dict(report.as_dict(), graph=str(out), digest=file_digest(out))
    print(json.dumps(stats, sort_keys=True))
    logger.info("Graph written to %s (%d documents, %d edges)", out, graph.num_nodes, len(graph.edges))
    return 0
