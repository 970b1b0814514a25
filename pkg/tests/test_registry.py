import json
from datetime import datetime, timezone

import pytest

from database import resolve_registry_url
from doctree.services.registry import MANIFEST_FILENAME, RunRegistry, build_manifest
from doctree.utils.digests import config_digest, file_digest
from doctree.utils.time_utils import format_timestamp
from models import RunStatus


@pytest.fixture
def manifest(tmp_path):
    graph = tmp_path / "graph.json"
    graph.write_text("{}", encoding="utf-8")
    return build_manifest("train", {"gamma": 0.5, "iterations": 4}, {"graph": graph}, seed=3)


@pytest.fixture
def registry(tmp_path):
    registry = RunRegistry(resolve_registry_url(None, tmp_path))
    yield registry
    registry.close()


class TestManifest:
    def test_digests(self, manifest, tmp_path):
        assert manifest.config_digest == config_digest({"iterations": 4, "gamma": 0.5})
        assert manifest.inputs == {"graph": file_digest(tmp_path / "graph.json")}
        assert manifest.versions["doctree"]

    def test_written_file(self, manifest, tmp_path):
        manifest.finish(datetime(2024, 1, 2, tzinfo=timezone.utc))
        path = manifest.write(tmp_path)

        assert path.name == MANIFEST_FILENAME
        payload = json.loads(path.read_text(encoding="utf-8"))
        assert payload["finished_at"] == "2024-01-02T00:00:00+00:00"
        assert payload["seed"] == 3


class TestRunRegistry:
    def test_run_lifecycle(self, registry, manifest, tmp_path):
        run_id = registry.start_run(
            manifest,
            hyperparameters={"gamma": 0.5, "eta": 0.1, "alpha": 1.0},
            chain={"iterations": 4, "burn_in": 2, "lag": 1},
            workers=1,
            output_dir=tmp_path,
        )
        registry.record_sample(run_id, 3, -10.5, 1.5, tmp_path / "sample-00000003.json")
        registry.record_sample(run_id, 4, -9.5, 1.25, None)
        registry.finish_run(run_id, RunStatus.COMPLETED, manifest)

        assert registry.runs() == [
            {
                "id": run_id,
                "status": "completed",
                "config_digest": manifest.config_digest,
                "seed": 3,
                "samples": 2,
            }
        ]

    def test_unknown_run(self, registry):
        with pytest.raises(ValueError, match="not in the registry"):
            registry.finish_run(42, RunStatus.FAILED)


class TestRegistryUrl:
    def test_full_url_passes_through(self):
        assert resolve_registry_url("postgresql://user@host/db") == "postgresql://user@host/db"

    def test_bare_path_becomes_sqlite(self, tmp_path):
        url = resolve_registry_url(str(tmp_path / "runs.sqlite"))
        assert url == f"sqlite:///{(tmp_path / 'runs.sqlite').resolve()}"

    def test_default_lives_in_output_dir(self, tmp_path):
        assert resolve_registry_url("", tmp_path).endswith("registry.sqlite")

    def test_nothing_to_go_on(self):
        with pytest.raises(ValueError):
            resolve_registry_url(None)


def test_naive_timestamps_are_rejected():
    with pytest.raises(ValueError, match="timezone-aware"):
        format_timestamp(datetime(2024, 1, 1))
