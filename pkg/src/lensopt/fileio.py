"""Serialization: legacy-ASCII VTK snapshots, delimited logs, run manifests.

Nodal fields go to legacy VTK STRUCTURED_POINTS files (one per snapshot,
zero-padded step suffix), logs and sweep tables to comma-delimited text
with a header row.  All floats print with 17 significant digits, so
read-back reproduces the binary values exactly and identical runs produce
bitwise-identical files; nothing here ever writes a timestamp.
"""

import hashlib
import json
import os

import numpy as np

from .errors import LensoptError
from .grid import Grid

_FMT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _FMT % value
    return str(value)


def write_field(path: str, grid: Grid, values, name: str = "field"):
    """One nodal scalar field as a legacy-ASCII VTK structured-points file."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_nodes,):
        raise LensoptError(f"field shape {values.shape} != ({grid.n_nodes},)")
    lines = [
        "# vtk DataFile Version 3.0",
        name,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {_FMT % grid.hx} {_FMT % grid.hy} 1",
        f"POINT_DATA {grid.n_nodes}",
        f"SCALARS {name} double",
        "LOOKUP_TABLE default",
    ]
    lines.extend(_FMT % v for v in values)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise LensoptError(f"cannot write {path!r}: {exc}") from exc


def read_field(path: str) -> np.ndarray:
    """Read back a field written by write_field."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise LensoptError(f"cannot read {path!r}: {exc}") from exc
    try:
        count = next(int(l.split()[1]) for l in lines if l.startswith("POINT_DATA"))
        start = next(i for i, l in enumerate(lines)
                     if l.startswith("LOOKUP_TABLE")) + 1
        return np.array([float(l) for l in lines[start:start + count]])
    except (StopIteration, ValueError, IndexError) as exc:
        raise LensoptError(f"{path!r} is not a field snapshot") from exc


def snapshot_path(outdir: str, name: str, step: int) -> str:
    return os.path.join(outdir, f"{name}_{step:06d}.vtk")


def write_trajectory(outdir: str, grid: Grid, series, name: str,
                     stride: int = 1) -> list:
    """Write a time series of nodal fields, one VTK file per snapshot."""
    series = np.asarray(series, dtype=float)
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for n in range(0, series.shape[0], stride):
        p = snapshot_path(outdir, name, n)
        write_field(p, grid, series[n], name=name)
        paths.append(p)
    return paths


def read_trajectory(outdir: str, name: str, n_steps: int, n_nodes: int) -> np.ndarray:
    out = np.empty((n_steps + 1, n_nodes))
    for n in range(n_steps + 1):
        vals = read_field(snapshot_path(outdir, name, n))
        if vals.size != n_nodes:
            raise LensoptError(f"snapshot {n} has {vals.size} values, "
                               f"expected {n_nodes}")
        out[n] = vals
    return out


def write_log(path: str, rows: list):
    """Comma-delimited table with one header row; rows are dicts sharing keys."""
    if not rows:
        raise LensoptError("refusing to write an empty log")
    keys = list(rows[0].keys())
    lines = [",".join(keys)]
    for row in rows:
        lines.append(",".join(_fmt(row[k]) for k in keys))
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_log(path: str) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    keys = lines[0].split(",")
    out = []
    for line in lines[1:]:
        row = {}
        for key, tok in zip(keys, line.split(",")):
            try:
                row[key] = float(tok)
            except ValueError:
                row[key] = tok
        out.append(row)
    return out


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_manifest(outdir: str, scenario, seed: int = 0,
                   resolution_scale: int = 1, extras: dict | None = None):
    """Record what produced a run: config hash, resolved grid/time axis,
    all pinned tolerances, package version.  Deterministic content."""
    from . import __version__
    from .tolerances import TOLERANCES
    manifest = {
        "package_version": __version__,
        "config_sha256": config_digest(scenario.config),
        "grid": {"nx": scenario.grid.nx, "ny": scenario.grid.ny,
                 "lx": scenario.grid.lx, "ly": scenario.grid.ly},
        "time": {"t_final": scenario.t_final, "tau": scenario.tau,
                 "n_steps": scenario.n_steps},
        "seed": seed,
        "resolution_scale": resolution_scale,
        "tolerances": TOLERANCES,
    }
    if extras:
        manifest.update(extras)
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
