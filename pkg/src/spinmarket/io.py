"""CSV/JSON persistence and run manifests.

All tabular artifacts are CSV with a leading ``# schema=vN`` comment line and
a header row.  Floats are written with round-trip precision so a rerun with
the same seed produces byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "v1"


def _format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_table(path, columns: dict) -> None:
    """Write named columns (equal-length arrays) as a schema-tagged CSV."""
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    n = len(arrays[0])
    for a in arrays:
        if len(a) != n:
            raise ValueError("columns must have equal length")
    path = Path(path)
    with path.open("w") as f:
        f.write(f"# schema={SCHEMA_VERSION}\n")
        f.write(",".join(names) + "\n")
        for i in range(n):
            f.write(",".join(_format_value(a[i]) for a in arrays) + "\n")


def read_table(path) -> dict:
    """Read a schema-tagged CSV back into a dict of float64 arrays."""
    path = Path(path)
    with path.open() as f:
        header = None
        rows = []
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([float(x) for x in line.split(",")])
    if header is None:
        raise ValueError(f"no header row in {path}")
    data = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


def write_json(path, obj) -> None:
    with Path(path).open("w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path):
    with Path(path).open() as f:
        return json.load(f)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Provenance record written next to every command's outputs."""

    command: str
    config: dict
    seeds: dict
    code_version: str
    wall_clock_s: float = 0.0
    created: str = ""
    outputs: list = field(default_factory=list)

    def add_output(self, out_dir, path) -> None:
        p = Path(path)
        self.outputs.append({
            "path": str(p.relative_to(out_dir)),
            "sha256": sha256_file(p),
            "bytes": p.stat().st_size,
        })

    def write(self, out_dir) -> Path:
        self.created = time.strftime("%Y-%m-%dT%H:%M:%S")
        target = Path(out_dir) / "manifest.json"
        write_json(target, {
            "command": self.command,
            "config": self.config,
            "seeds": self.seeds,
            "code_version": self.code_version,
            "wall_clock_s": self.wall_clock_s,
            "created": self.created,
            "outputs": self.outputs,
        })
        return target
