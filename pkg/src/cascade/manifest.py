"""Run manifests: provenance sidecars accompanying every CLI output file."""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from . import __version__


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_digest(params: dict) -> str:
    return hashlib.sha256(
        json.dumps(params, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()


def write_manifest(
    output_path: str | Path,
    *,
    command: str,
    inputs: list[str | Path],
    params: dict,
    seeds: list[int] | None = None,
) -> Path:
    """Write `<output>.manifest.json` next to the output file.

    The manifest is the only place a timestamp appears; data outputs stay
    byte-identical across reruns.
    """
    output_path = Path(output_path)
    manifest = {
        "command": command,
        "inputs": {str(p): _sha256_file(Path(p)) for p in inputs},
        "config_digest": config_digest(params),
        "params": params,
        "seeds": seeds or [],
        "tool_version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    manifest_path = output_path.with_name(output_path.name + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest_path
