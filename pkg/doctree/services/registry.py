"""Run manifests and the SQLite run registry."""

from __future__ import annotations

import json
import platform
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Mapping, Optional

import matplotlib
import networkx
import numpy
import pandas
import scipy
from sqlalchemy import select

import doctree
from database import Base, build_session_factory, create_registry_engine
from doctree.common import get_logger
from doctree.utils.digests import config_digest, file_digest
from doctree.utils.time_utils import format_timestamp, get_now_utc
from models import RunRecord, RunStatus, SampleRecord

logger = get_logger("services.registry")

MANIFEST_FILENAME = "manifest.json"


def package_versions() -> Dict[str, str]:
    return {
        "doctree": doctree.__version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "networkx": networkx.__version__,
        "pandas": pandas.__version__,
        "matplotlib": matplotlib.__version__,
    }


@dataclass
class RunManifest:
    """Everything needed to reproduce one command invocation."""

    command: str
    config: Dict[str, object]
    config_digest: str
    inputs: Dict[str, str]
    seed: int
    started_at: str
    finished_at: Optional[str] = None
    versions: Dict[str, str] = field(default_factory=package_versions)

    def finish(self, when: Optional[datetime] = None) -> None:
        self.finished_at = format_timestamp(when or get_now_utc())

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    def write(self, directory: Path) -> Path:
        path = Path(directory) / MANIFEST_FILENAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def build_manifest(
    command: str,
    config: Mapping[str, object],
    inputs: Mapping[str, Path],
    seed: int,
) -> RunManifest:
    return RunManifest(
        command=command,
        config=dict(config),
        config_digest=config_digest(config),
        inputs={name: file_digest(path) for name, path in sorted(inputs.items())},
        seed=seed,
        started_at=format_timestamp(get_now_utc()),
    )


class RunRegistry:
    """Records train runs and their collected samples."""

    def __init__(self, url: str) -> None:
        self.url = url
        self.engine = create_registry_engine(url)
        Base.metadata.create_all(bind=self.engine)
        self._sessions = build_session_factory(self.engine)

    def start_run(
        self,
        manifest: RunManifest,
        *,
        hyperparameters: Mapping[str, float],
        chain: Mapping[str, int],
        workers: int,
        output_dir: Path,
    ) -> int:
        with self._sessions() as session:
            record = RunRecord(
                command=manifest.command,
                config_digest=manifest.config_digest,
                graph_digest=manifest.inputs.get("graph", ""),
                seed=manifest.seed,
                gamma=float(hyperparameters["gamma"]),
                eta=float(hyperparameters["eta"]),
                alpha=float(hyperparameters["alpha"]),
                iterations=int(chain["iterations"]),
                burn_in=int(chain["burn_in"]),
                lag=int(chain["lag"]),
                workers=workers,
                output_dir=str(output_dir),
                status=RunStatus.RUNNING,
            )
            session.add(record)
            session.commit()
            logger.info("Registered run %d in %s", record.id, self.url)
            return record.id

    def record_sample(self, run_id: int, iteration: int, log_likelihood: float, average_depth: float, path: Optional[Path]) -> None:
        with self._sessions() as session:
            session.add(
                SampleRecord(
                    run_id=run_id,
                    iteration=iteration,
                    log_likelihood=log_likelihood,
                    average_depth=average_depth,
                    path=str(path) if path is not None else None,
                )
            )
            session.commit()

    def finish_run(self, run_id: int, status: RunStatus, manifest: Optional[RunManifest] = None) -> None:
        with self._sessions() as session:
            record = session.get(RunRecord, run_id)
            if record is None:
                raise ValueError(f"run {run_id} is not in the registry")
            record.status = status
            record.finished_at = get_now_utc()
            if manifest is not None:
                record.manifest = json.dumps(manifest.to_dict(), sort_keys=True)
            session.commit()

    def runs(self) -> List[Dict[str, object]]:
        with self._sessions() as session:
            records = session.execute(select(RunRecord).order_by(RunRecord.id)).scalars().all()
            return [
                {
                    "id": record.id,
                    "status": record.status.value,
                    "config_digest": record.config_digest,
                    "seed": record.seed,
                    "samples": len(record.samples),
                }
                for record in records
            ]

    def close(self) -> None:
        self.engine.dispose()


__all__ = ["RunManifest", "RunRegistry", "build_manifest", "package_versions"]
