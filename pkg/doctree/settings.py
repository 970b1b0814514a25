"""Training configuration: defaults, presets, ``.env``-style config files and CLI overrides.

Precedence is explicit command-line flag, then preset, then config file,
then the built-in defaults. Config files are parsed with python-dotenv
without touching ``os.environ``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Mapping, Optional

from dotenv import dotenv_values

from doctree.common import SettingsError, get_logger
from doctree.services.chain import GibbsConfig
from doctree.services.export import ExportConfig
from doctree.services.hdtm import Hyperparameters
from doctree.services.parallel import BACKENDS, ParallelConfig

logger = get_logger("settings")

DEFAULTS: Dict[str, object] = {
    "gamma": 0.95,
    "eta": 0.1,
    "alpha": 1.0,
    "iterations": 5000,
    "burn_in": 2000,
    "lag": 20,
    "seed": 0,
    "workers": 1,
    "checkpoint_every": 50,
    "top_words": 7,
    "log_every": 100,
    "backend": "process",
}

PRESETS: Dict[str, Dict[str, object]] = {
    "deep": {"gamma": 0.05},
    "shallow": {"gamma": 0.95},
}

_CONVERTERS: Dict[str, Callable[[str], object]] = {
    "gamma": float,
    "eta": float,
    "alpha": float,
    "iterations": int,
    "burn_in": int,
    "lag": int,
    "seed": int,
    "workers": int,
    "checkpoint_every": int,
    "top_words": int,
    "log_every": int,
    "backend": str,
}


def load_config_file(path: Path) -> Dict[str, object]:
    """Read ``KEY=VALUE`` lines into typed settings.

    Raises:
        ValueError: On a missing file, an unknown key or a value that does not parse.
    """
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"config file {path} does not exist")

    settings: Dict[str, object] = {}
    for key, raw_value in dotenv_values(path).items():
        name = key.strip().lower()
        if name not in _CONVERTERS:
            raise ValueError(f"{path}: unknown setting {key!r}")
        if raw_value is None or not raw_value.strip():
            raise ValueError(f"{path}: setting {key!r} has no value")
        try:
            settings[name] = _CONVERTERS[name](raw_value.strip())
        except ValueError as exc:
            raise ValueError(f"{path}: setting {key!r} has an invalid value {raw_value!r}") from exc
    logger.debug("Loaded %d setting(s) from %s", len(settings), path)
    return settings


@dataclass(frozen=True)
class TrainSettings:
    hyperparameters: Hyperparameters
    gibbs: GibbsConfig
    parallel: ParallelConfig
    export: ExportConfig

    def as_dict(self) -> Dict[str, object]:
        return {
            **self.hyperparameters.as_dict(),
            **self.gibbs.as_dict(),
            "workers": self.parallel.workers,
            "backend": self.parallel.backend,
        }


def merge_settings(
    overrides: Mapping[str, Optional[object]],
    config_path: Optional[Path] = None,
    preset: Optional[str] = None,
) -> Dict[str, object]:
    merged = dict(DEFAULTS)
    if config_path is not None:
        merged.update(load_config_file(config_path))
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        merged.update(PRESETS[preset])
    merged.update({key: value for key, value in overrides.items() if value is not None and key in DEFAULTS})
    return merged


def resolve_train_settings(
    overrides: Mapping[str, Optional[object]],
    config_path: Optional[Path] = None,
    preset: Optional[str] = None,
) -> TrainSettings:
    """Build validated settings; ``None`` overrides mean "not given".

    Raises:
        SettingsError: If any merged value is unusable.
    """
    try:
        return _build_settings(merge_settings(overrides, config_path, preset))
    except ValueError as exc:
        raise SettingsError(str(exc)) from exc


def _build_settings(merged: Mapping[str, object]) -> TrainSettings:
    if merged["backend"] not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}, got {merged['backend']!r}")
    return TrainSettings(
        hyperparameters=Hyperparameters(
            gamma=float(merged["gamma"]),
            eta=float(merged["eta"]),
            alpha=float(merged["alpha"]),
        ),
        gibbs=GibbsConfig(
            iterations=int(merged["iterations"]),
            burn_in=int(merged["burn_in"]),
            lag=int(merged["lag"]),
            seed=int(merged["seed"]),
            log_every=int(merged["log_every"]),
            checkpoint_every=int(merged["checkpoint_every"]),
            top_words=int(merged["top_words"]),
        ),
        parallel=ParallelConfig(workers=int(merged["workers"]), backend=str(merged["backend"])),
        export=ExportConfig(top_words=int(merged["top_words"])),
    )


__all__ = ["DEFAULTS", "PRESETS", "TrainSettings", "load_config_file", "merge_settings", "resolve_train_settings"]
