"""Command tree for the ``doctree`` CLI."""

from __future__ import annotations

import argparse
from pathlib import Path

from doctree import __version__
from doctree.handlers.evaluate import (
    run_baseline,
    run_certainty,
    run_intrusion,
    run_jaccard,
    run_precision,
    run_similarity,
)
from doctree.handlers.ingest import run_ingest
from doctree.handlers.train import run_train
from doctree.services.baselines import BASELINE_KINDS
from doctree.services.parallel import BACKENDS
from doctree.settings import PRESETS


def open_unit_interval(value: str) -> float:
    number = _float(value)
    if not 0.0 < number < 1.0:
        raise argparse.ArgumentTypeError(f"expected a value strictly between 0 and 1, got {value}")
    return number


def unit_interval(value: str) -> float:
    number = _float(value)
    if not 0.0 <= number <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {value}")
    return number


def positive_float(value: str) -> float:
    number = _float(value)
    if not number > 0.0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return number


def positive_int(value: str) -> int:
    number = _int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def non_negative_int(value: str) -> int:
    number = _int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return number


def _float(value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None


def _int(value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}") from None


def _add_ingest(subparsers) -> None:
    parser = subparsers.add_parser("ingest", help="Build a document graph from edge and document files.")
    parser.add_argument("--edges", type=Path, required=True, help="Tab-separated source/target edge file.")
    parser.add_argument(
        "--documents",
        type=Path,
        required=True,
        help="JSON lines with id, title, categories and text.",
    )
    parser.add_argument("--root", required=True, help="External id of the root document.")
    parser.add_argument("--redirects", type=Path, help="Tab-separated alias/target redirect file.")
    parser.add_argument("--out", type=Path, required=True, help="Path of the graph JSON to write.")
    parser.set_defaults(handler=run_ingest)


def _add_train(subparsers) -> None:
    parser = subparsers.add_parser(
        "train",
        help="Run the Gibbs sampler and export samples, diagnostics and the MAP hierarchy.",
        description="Unset flags fall back to the preset, then the config file, then the defaults.",
    )
    parser.add_argument("--graph", type=Path, required=True, help="Graph JSON written by 'ingest'.")
    parser.add_argument("--out", type=Path, required=True, help="Output directory.")
    parser.add_argument("--gamma", type=open_unit_interval, help="Restart probability in (0, 1); default 0.95.")
    parser.add_argument("--eta", type=positive_float, help="Topic-word Dirichlet prior; default 0.1.")
    parser.add_argument("--alpha", type=positive_float, help="Recorded in the manifest; default 1.0.")
    parser.add_argument("--iters", type=positive_int, help="Total Gibbs iterations; default 5000.")
    parser.add_argument("--burnin", type=non_negative_int, help="Iterations discarded before sampling; default 2000.")
    parser.add_argument("--lag", type=positive_int, help="Iterations between collected samples; default 20.")
    parser.add_argument("--seed", type=non_negative_int, help="Chain seed; default 0.")
    parser.add_argument("--workers", type=positive_int, help="Parallel workers; 1 runs the serial sampler.")
    parser.add_argument("--backend", choices=BACKENDS, help="Where parallel workers run; default 'process'.")
    parser.add_argument("--top-words", type=positive_int, help="Words exported per node; default 7.")
    parser.add_argument("--log-every", type=positive_int, help="Iterations between progress lines; default 100.")
    parser.add_argument(
        "--checkpoint-every",
        type=positive_int,
        help="Iterations between checkpoints; default 50.",
    )
    parser.add_argument("--checkpoint-dir", type=Path, help="Checkpoint directory; default <out>/checkpoints.")
    parser.add_argument("--resume", action="store_true", help="Continue from the latest checkpoint.")
    parser.add_argument("--config", type=Path, help="KEY=VALUE settings file.")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="Named gamma preset.")
    parser.add_argument("--registry", help="SQLAlchemy URL of the run registry; default <out>/registry.sqlite.")
    parser.set_defaults(handler=run_train)


def _add_eval(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Score hierarchies and samples.")
    commands = parser.add_subparsers(dest="eval_command", metavar="METRIC", required=True)

    certainty = commands.add_parser("certainty", help="Per-node parent certainty across collected samples.")
    certainty.add_argument("--samples", type=Path, required=True, help="Directory of sample-*.json files.")
    certainty.add_argument("--graph", type=Path, required=True)
    certainty.add_argument("--hierarchy", type=Path, help="Hierarchy JSON whose parents are scored; default MAP.")
    certainty.add_argument("--out", type=Path, required=True, help="Output directory.")
    certainty.set_defaults(handler=run_certainty)

    jaccard = commands.add_parser("jaccard", help="Ancestor/category Jaccard against a reference.")
    jaccard.add_argument("--hierarchy", type=Path, required=True)
    jaccard.add_argument("--graph", type=Path, required=True)
    jaccard.add_argument(
        "--reference",
        type=Path,
        help="JSON lines with id and categories; default the graph's own categories.",
    )
    jaccard.add_argument("--samples", type=Path, help="Sample directory used to bin scores by certainty.")
    jaccard.add_argument("--out", type=Path, required=True)
    jaccard.set_defaults(handler=run_jaccard)

    precision = commands.add_parser("precision", help="Model precision from intrusion judgments.")
    precision.add_argument(
        "--judgments",
        type=Path,
        action="append",
        required=True,
        help="JSON-lines judgment file; repeat for several models.",
    )
    precision.add_argument(
        "--model",
        action="append",
        help="Model label for the matching --judgments file; overrides the label in the file.",
    )
    precision.add_argument("--out", type=Path, required=True)
    precision.set_defaults(handler=run_precision)

    similarity = commands.add_parser("similarity", help="Graph similarity against a reference tree.")
    similarity.add_argument("--hierarchy", type=Path, required=True)
    similarity.add_argument("--graph", type=Path, required=True)
    similarity.add_argument(
        "--reference-edges",
        type=Path,
        required=True,
        help="Tab-separated parent/child external ids of the reference tree.",
    )
    similarity.add_argument("--groups", type=positive_int, help="Solve per random node group instead of exactly.")
    similarity.add_argument("--seed", type=non_negative_int, default=0)
    similarity.add_argument("--out", type=Path, required=True)
    similarity.set_defaults(handler=run_similarity)

    intrusion = commands.add_parser("intrusion-gen", help="Generate document intrusion tasks.")
    intrusion.add_argument("--hierarchy", type=Path, required=True)
    intrusion.add_argument("--graph", type=Path, required=True)
    intrusion.add_argument("--count", type=non_negative_int, required=True)
    intrusion.add_argument("--seed", type=non_negative_int, default=0)
    intrusion.add_argument("--model", dest="model_label", default="model", help="Label stored with each task.")
    intrusion.add_argument("--out", type=Path, required=True, help="JSON-lines task file to write.")
    intrusion.set_defaults(handler=run_intrusion)

    baseline = commands.add_parser("baseline", help="Export a baseline hierarchy.")
    baseline.add_argument("--graph", type=Path, required=True)
    baseline.add_argument("--kind", choices=BASELINE_KINDS, required=True)
    baseline.add_argument("--seed", type=non_negative_int, default=0)
    baseline.add_argument("--out", type=Path, required=True, help="Output directory.")
    baseline.add_argument(
        "--propagation-alpha",
        type=unit_interval,
        help="Also write term-propagation top words with this child weight.",
    )
    baseline.add_argument("--recursive", action="store_true", help="Propagate already-propagated child counts.")
    baseline.add_argument("--mu", type=positive_float, default=2000.0, help="Dirichlet smoothing mass.")
    baseline.add_argument("--top-words", type=positive_int, default=7)
    baseline.set_defaults(handler=run_baseline)


def build_application() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doctree",
        description="Infer document hierarchies from document graphs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level.")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    _add_ingest(subparsers)
    _add_train(subparsers)
    _add_eval(subparsers)
    return parser
