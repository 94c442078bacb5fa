"""Output writing: delimited tables, JSON summaries, and run manifests.

Floats are serialized with 17 significant digits so re-parsing
round-trips the exact double; NaN/None become empty CSV fields and JSON
nulls. The manifest is written last and marks a completed run.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json
import math
import os

FLOAT_FMT = "%.17g"


def fmt_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return FLOAT_FMT % value
    return str(value)


def write_csv(path, header, rows) -> None:
    """Write a delimited table with unit-suffixed column names."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt_value(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, config_text: str, version: str, file_names) -> str:
    """Write manifest.json (config hash, version, timestamp, checksums).

    Must be called after every other output file exists; its presence
    marks the run as complete. The timestamp is the only field allowed
    to differ between reruns of an identical config.
    """
    manifest = {
        "config_sha256": hashlib.sha256(config_text.encode("utf-8")).hexdigest(),
        "toolkit_version": version,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(
            timespec="seconds"
        ),
        "files": {
            name: sha256_file(os.path.join(out_dir, name)) for name in sorted(file_names)
        },
    }
    path = os.path.join(out_dir, "manifest.json")
    write_json(path, manifest)
    return path
