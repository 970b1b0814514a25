"""``train``: run the Gibbs chain and write samples, diagnostics and the MAP hierarchy."""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path
from typing import Dict, Optional

import pandas as pd

from database import resolve_registry_url
from doctree.common import get_logger, log_command_invocation
from doctree.handlers.reporting import plot_diagnostics
from doctree.services.chain import ChainResult, ChainSample, latest_checkpoint, run_gibbs
from doctree.services.corpus import read_graph
from doctree.services.export import SAMPLES_DIRNAME, export_map, write_sample
from doctree.services.hdtm import counts_under
from doctree.services.registry import RunRegistry, build_manifest
from doctree.settings import TrainSettings, resolve_train_settings
from models import RunStatus

logger = get_logger("handlers.train")

CHECKPOINTS_DIRNAME = "checkpoints"
DIAGNOSTICS_FILENAME = "diagnostics.csv"


def settings_from_args(args: argparse.Namespace) -> TrainSettings:
    overrides = {
        "gamma": args.gamma,
        "eta": args.eta,
        "alpha": args.alpha,
        "iterations": args.iters,
        "burn_in": args.burnin,
        "lag": args.lag,
        "seed": args.seed,
        "workers": args.workers,
        "checkpoint_every": args.checkpoint_every,
        "top_words": args.top_words,
        "log_every": args.log_every,
        "backend": args.backend,
    }
    return resolve_train_settings(overrides, args.config, args.preset)


def likelihood_depth_correlation(samples) -> Optional[float]:
    if len(samples) < 2:
        return None
    frame = pd.DataFrame(
        {
            "log_likelihood": [sample.log_likelihood for sample in samples],
            "average_depth": [sample.average_depth for sample in samples],
        }
    )
    value = frame["log_likelihood"].corr(frame["average_depth"])
    return None if math.isnan(value) else float(value)


def write_summary(result: ChainResult, out: Path, settings: TrainSettings) -> Dict[str, object]:
    best = result.best_sample
    summary = {
        "samples": len(result.samples),
        "expected_samples": settings.gibbs.expected_samples,
        "final_log_likelihood": float(result.diagnostics["log_likelihood"].iloc[-1])
        if not result.diagnostics.empty
        else None,
        "likelihood_depth_correlation": likelihood_depth_correlation(result.samples),
        "best_sample_iteration": best.iteration if best else None,
        "best_sample_log_likelihood": best.log_likelihood if best else None,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def run_train(args: argparse.Namespace) -> int:
    log_command_invocation(logger, "train", args)
    settings = settings_from_args(args)
    graph, vocabulary = read_graph(args.graph)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples_dir = out / SAMPLES_DIRNAME
    checkpoint_dir = Path(args.checkpoint_dir) if args.checkpoint_dir else out / CHECKPOINTS_DIRNAME

    resume_from = None
    if args.resume:
        resume_from = latest_checkpoint(checkpoint_dir)
        if resume_from is None:
            raise ValueError(f"--resume given but no checkpoint exists in {checkpoint_dir}")

    manifest = build_manifest("train", settings.as_dict(), {"graph": Path(args.graph)}, settings.gibbs.seed)
    registry = RunRegistry(resolve_registry_url(args.registry, out))
    run_id = registry.start_run(
        manifest,
        hyperparameters=settings.hyperparameters.as_dict(),
        chain=settings.gibbs.as_dict(),
        workers=settings.parallel.workers,
        output_dir=out,
    )

    def on_sample(sample: ChainSample) -> None:
        path = write_sample(sample, vocabulary, samples_dir)
        registry.record_sample(run_id, sample.iteration, sample.log_likelihood, sample.average_depth, path)

    try:
        result = run_gibbs(
            graph,
            settings.hyperparameters,
            settings.gibbs,
            parallel=settings.parallel if settings.parallel.workers > 1 else None,
            vocabulary_size=vocabulary.size,
            checkpoint_dir=checkpoint_dir,
            resume_from=resume_from,
            on_sample=on_sample,
            diagnostics_path=out / DIAGNOSTICS_FILENAME,
        )

        collected = pd.DataFrame(
            {
                "iteration": [sample.iteration for sample in result.samples],
                "log_likelihood": [sample.log_likelihood for sample in result.samples],
                "average_depth": [sample.average_depth for sample in result.samples],
            }
        )
        plot_diagnostics(result.diagnostics, collected, out / "diagnostics.png")

        hp = settings.hyperparameters
        if result.samples:
            map_tree = result.map_hierarchy()
            export_map(map_tree, graph, counts_under(result.state, map_tree), vocabulary, hp, out, settings.export)
            best = result.best_sample
            best_tree = best.hierarchy(graph.root)
            export_map(
                best_tree, graph, counts_under(result.state, best_tree), vocabulary, hp, out, settings.export, stem="best"
            )
        else:
            logger.warning("No samples were collected; MAP export skipped")

        summary = write_summary(result, out, settings)
    except Exception:
        registry.finish_run(run_id, RunStatus.FAILED)
        registry.close()
        raise

    manifest.finish()
    manifest.write(out)
    registry.finish_run(run_id, RunStatus.COMPLETED, manifest)
    registry.close()
    logger.info(
        "Training finished: %d sample(s), correlation(log likelihood, depth)=%s",
        summary["samples"],
        summary["likelihood_depth_correlation"],
    )
    return 0
