"""``eval`` subcommands: certainty, jaccard, precision, similarity, intrusion-gen and baseline."""

from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import Dict, List

import numpy as np

from doctree.common import get_logger, log_command_invocation
from doctree.handlers.reporting import (
    plot_certainty_density,
    plot_jaccard_by_certainty,
    plot_model_precision,
)
from doctree.services.baselines import baseline_hierarchies, dirichlet_smooth, term_propagation
from doctree.services.corpus import DocumentGraph, load_redirects, read_graph
from doctree.services.evaluation import (
    CategoryReference,
    JudgmentSet,
    certainty,
    jaccard_vs_reference,
    load_judgments,
    load_reference,
    model_precision,
)
from doctree.services.export import export_map, read_hierarchy_json, read_samples
from doctree.services.hdtm import Hyperparameters
from doctree.services.hierarchy import Hierarchy
from doctree.services.intrusion import generate_intrusion_tasks, write_tasks
from doctree.services.similarity import graph_similarity

logger = get_logger("handlers.evaluate")


def _output_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _external_edges(hierarchy: Hierarchy, graph: DocumentGraph) -> List[tuple]:
    return [
        (graph.nodes[parent].external_id, graph.nodes[node].external_id)
        for parent, node in hierarchy.edges()
    ]


def run_certainty(args: argparse.Namespace) -> int:
    log_command_invocation(logger, "eval certainty", args)
    graph, _ = read_graph(args.graph)
    samples = read_samples(args.samples)
    hierarchy = read_hierarchy_json(args.hierarchy) if args.hierarchy else None
    report = certainty(samples, graph, hierarchy)

    out = _output_dir(args)
    frame = report.frame(graph)
    frame.to_csv(out / "certainty.csv", index=False)
    histogram = report.histogram()
    histogram.to_csv(out / "certainty_density.csv", index=False)
    plot_certainty_density(histogram, out / "certainty_density.png")

    print(frame.to_string(index=False))
    logger.info("Certainty computed for %d node(s) from %d sample(s)", len(frame), len(samples))
    return 0


def run_jaccard(args: argparse.Namespace) -> int:
    log_command_invocation(logger, "eval jaccard", args)
    graph, _ = read_graph(args.graph)
    hierarchy = read_hierarchy_json(args.hierarchy)
    reference = load_reference(args.reference) if args.reference else CategoryReference.from_graph(graph)
    certainty_report = certainty(read_samples(args.samples), graph, hierarchy) if args.samples else None

    report = jaccard_vs_reference(hierarchy, reference, graph, certainty_report)
    out = _output_dir(args)
    report.details.to_csv(out / "jaccard.csv", index=False)
    report.summary.to_csv(out / "jaccard_summary.csv", index=False)
    if not report.details.empty:
        plot_jaccard_by_certainty(report.summary, out / "jaccard_by_certainty.png")

    (out / "jaccard.json").write_text(
        json.dumps(
            {
                "scored": int(len(report.details)),
                "skipped_missing": report.skipped_missing,
                "skipped_empty": report.skipped_empty,
                "mean": float(report.details["jaccard"].mean()) if not report.details.empty else None,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    print(report.summary.to_string(index=False))
    return 0


def run_precision(args: argparse.Namespace) -> int:
    log_command_invocation(logger, "eval precision", args)
    tasks = []
    for index, path in enumerate(args.judgments):
        label = args.model[index] if args.model and index < len(args.model) else None
        tasks.extend(load_judgments(path, label).tasks)
    report = model_precision(JudgmentSet(tuple(tasks)))

    out = _output_dir(args)
    report.per_task.to_csv(out / "model_precision.csv", index=False)
    report.summary.to_csv(out / "model_precision_summary.csv", index=False)
    if not report.per_task.empty:
        plot_model_precision(report.per_task, list(report.summary["model"]), out / "model_precision.png")
    print(report.summary.to_string(index=False))
    return 0


def run_similarity(args: argparse.Namespace) -> int:
    log_command_invocation(logger, "eval similarity", args)
    graph, _ = read_graph(args.graph)
    hierarchy = read_hierarchy_json(args.hierarchy)
    reference_edges = load_redirects(args.reference_edges)
    value = graph_similarity(
        _external_edges(hierarchy, graph),
        reference_edges,
        groups=args.groups,
        seed=args.seed,
    )

    out = _output_dir(args)
    payload: Dict[str, object] = {
        "similarity": value,
        "hierarchy": str(args.hierarchy),
        "reference": str(args.reference_edges),
        "groups": args.groups,
    }
    (out / "similarity.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"similarity={value:.6f}")
    return 0


def run_intrusion(args: argparse.Namespace) -> int:
    log_command_invocation(logger, "eval intrusion-gen", args)
    graph, _ = read_graph(args.graph)
    hierarchy = read_hierarchy_json(args.hierarchy)
    tasks = generate_intrusion_tasks(hierarchy, graph, args.count, np.random.default_rng(args.seed))
    path = write_tasks(tasks, graph, Path(args.out), model=args.model_label)
    logger.info("Wrote %d task(s) to %s", len(tasks), path)
    return 0


def run_baseline(args: argparse.Namespace) -> int:
    log_command_invocation(logger, "eval baseline", args)
    graph, vocabulary = read_graph(args.graph)
    hierarchy = baseline_hierarchies(graph, args.kind, args.seed)
    out = _output_dir(args)
    export_map(hierarchy, graph, None, vocabulary, Hyperparameters(), out, stem=f"baseline-{args.kind}")

    if args.propagation_alpha is not None:
        propagated = term_propagation(
            graph,
            hierarchy,
            args.propagation_alpha,
            vocabulary_size=vocabulary.size,
            recursive=args.recursive,
        )
        model = dirichlet_smooth(propagated, args.mu)
        top_words = {
            graph.nodes[node].external_id: [
                [vocabulary.word(word), probability] for word, probability in model.top_words(node, args.top_words)
            ]
            for node in range(graph.num_nodes)
        }
        path = out / f"propagation-{args.kind}.json"
        path.write_text(json.dumps(top_words, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        logger.info("Propagated language model top words written to %s", path)

    root = graph.root
    children = [graph.nodes[child].external_id for child in hierarchy.children[root]]
    print(json.dumps({"kind": args.kind, "root": graph.nodes[root].external_id, "root_children": children}))
    return 0
