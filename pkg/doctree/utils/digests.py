"""Content digests used by run manifests."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Mapping

_CHUNK_SIZE = 1 << 16


def file_digest(path: Path) -> str:
    """Return the hex SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(_CHUNK_SIZE), b""):
            digest.update(chunk)
    return digest.hexdigest()


def canonical_json(payload: Any) -> str:
    """Serialize with sorted keys and no whitespace so equal payloads hash equally."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_digest(config: Mapping[str, Any]) -> str:
    """Return the hex SHA-256 of the canonical JSON form of a config mapping."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()
