"""Charts written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  # isort:skip
import pandas as pd  # noqa: E402

from doctree.common import get_logger  # noqa: E402

logger = get_logger("handlers.reporting")


def _save(fig, path: Path) -> Path:
    plt.tight_layout()
    fig.savefig(path, format="png", dpi=150, bbox_inches="tight")
    plt.close(fig)
    logger.debug("Chart written to %s", path)
    return path


def plot_diagnostics(diagnostics: pd.DataFrame, collected: pd.DataFrame, path: Path) -> Path:
    """Log-likelihood trace plus likelihood against average depth of collected samples."""
    fig, (trace, scatter) = plt.subplots(1, 2, figsize=(11, 4.5))
    trace.plot(diagnostics["iteration"], diagnostics["log_likelihood"], linewidth=0.8)
    trace.set_xlabel("iteration")
    trace.set_ylabel("log likelihood")
    trace.set_title("Chain trace")

    scatter.scatter(collected["average_depth"], collected["log_likelihood"], s=12, alpha=0.7)
    scatter.set_xlabel("average depth")
    scatter.set_ylabel("log likelihood")
    scatter.set_title("Collected samples")
    return _save(fig, path)


def plot_certainty_density(histogram: pd.DataFrame, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    width = float(histogram["bin_end"].iloc[0] - histogram["bin_start"].iloc[0])
    ax.bar(histogram["bin_start"], histogram["density"], width=width, align="edge", edgecolor="black")
    ax.set_xlabel("certainty")
    ax.set_ylabel("density")
    ax.set_xlim(0.0, 1.0)
    return _save(fig, path)


def plot_jaccard_by_certainty(summary: pd.DataFrame, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    positions = summary["bin_start"] if "bin_start" in summary else range(len(summary))
    ax.errorbar(positions, summary["mean"], yerr=summary["stderr"], fmt="o-", capsize=3)
    ax.set_xlabel("certainty bin")
    ax.set_ylabel("mean Jaccard")
    ax.set_ylim(0.0, 1.0)
    return _save(fig, path)


def plot_model_precision(per_task: pd.DataFrame, models: Sequence[str], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    data = [per_task.loc[per_task["model"] == model, "precision"].to_numpy() for model in models]
    ax.boxplot(data, labels=list(models))
    ax.set_ylabel("model precision")
    ax.set_ylim(-0.05, 1.05)
    return _save(fig, path)
