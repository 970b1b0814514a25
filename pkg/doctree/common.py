"""Common utilities shared by services and command handlers."""

from __future__ import annotations

import argparse
import logging
from typing import Optional, Sequence


def get_logger(name: str) -> logging.Logger:
    """Return a namespaced logger under the `doctree` hierarchy."""
    return logging.getLogger(f"doctree.{name}")


def log_command_invocation(
    logger: logging.Logger,
    command_name: str,
    args: Optional[argparse.Namespace],
) -> None:
    """Log the parsed arguments of a command to aid reproducing a run."""
    if not logger.isEnabledFor(logging.INFO):
        return

    if args is None:
        logger.info("[%s] Invoked without arguments.", command_name)
        return

    options = {
        key: value
        for key, value in sorted(vars(args).items())
        if key != "handler"
    }
    logger.info("[%s] options=%r", command_name, options)


class CorpusError(ValueError):
    """Raised when input files cannot be turned into a document graph."""


class RedirectCycleError(CorpusError):
    """Raised when the redirect map loops back on itself."""

    def __init__(self, cycle: Sequence[str]) -> None:
        self.cycle = list(cycle)
        super().__init__(f"Redirect cycle: {' -> '.join(self.cycle)}")


class SettingsError(ValueError):
    """Raised when training settings from a config file, preset or flag are invalid."""


class HierarchyError(ValueError):
    """Raised when a parent assignment is not a rooted tree inside the graph."""


class CountConsistencyError(RuntimeError):
    """Raised when count tables disagree with the assignments they summarize."""


class PartitionError(RuntimeError):
    """Raised when a message is addressed to a vertex no partition owns."""


class ParallelSamplerError(RuntimeError):
    """Raised when a parallel iteration keeps failing after barrier restarts."""
