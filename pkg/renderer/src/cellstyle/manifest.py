"""Reading and updating the generator's dataset manifest.

The boundary contract with the generator is file-level only: a
`manifest.json` with `schema_version` 1 whose entries name a content image
(flattened mask) and a reference style tile, paths relative to the
manifest. Stylization adds an `image_path` key per entry.
"""
import json
from pathlib import Path

SUPPORTED_SCHEMA_VERSIONS = {1}


class ManifestError(Exception):
    pass


def read_manifest(path):
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"cannot parse manifest {path}: {exc}") from exc
    version = data.get("schema_version")
    if version not in SUPPORTED_SCHEMA_VERSIONS:
        raise ManifestError(f"unsupported manifest schema_version: {version}")
    entries = data.get("entries")
    if not isinstance(entries, list):
        raise ManifestError("manifest has no entries list")
    for i, entry in enumerate(entries):
        for key in ("content_image_path", "reference_tile_path"):
            if key not in entry:
                raise ManifestError(f"entry {i} is missing {key}")
    return data


def write_manifest(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True))
