"""Artifact writers: CSV, flat binary paths, JSON reports, run manifests.

Every writer is deterministic: floats are rendered with ``repr`` (shortest
round-trip form), JSON keys are sorted, and rows follow the natural grid
order.  Re-running a subcommand on the same scenario therefore produces
byte-identical payloads; the manifest carries the run metadata that may
legitimately differ (timestamp, wall time, thread count) and is excluded
from identity checks.
"""

from __future__ import annotations

import json
import platform
import time
from pathlib import Path

import numpy as np

from . import __version__, backends
from .errors import ScenarioError

__all__ = [
    "prepare_out_dir",
    "write_json",
    "write_manifest",
    "write_trajectory_csv",
    "write_paths_bin",
    "write_difference_csv",
    "write_grid_field_csv",
]


def _fmt(v) -> str:
    return repr(float(v))


def prepare_out_dir(path, force: bool = False) -> Path:
    """Create the output directory; refuse to reuse a non-empty one
    unless forced."""
    out = Path(path)
    if out.exists():
        if not out.is_dir():
            raise ScenarioError(f"output path {out} exists and is not a directory")
        if any(out.iterdir()) and not force:
            raise ScenarioError(
                f"output directory {out} is not empty; pass --force to overwrite"
            )
    else:
        out.mkdir(parents=True)
    return out


def write_json(path, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2)
    Path(path).write_text(text + "\n")


def write_manifest(
    out_dir, subcommand: str, scenario, threads: int, wall_time_s: float
) -> None:
    manifest = {
        "subcommand": subcommand,
        "scenario_hash": scenario.scenario_hash,
        "seed": scenario.solver.seed,
        "threads": threads,
        "backend": backends.backend_name(),
        "versions": {
            "mkvlab": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": round(wall_time_s, 3),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    write_json(Path(out_dir) / "manifest.json", manifest)


def write_trajectory_csv(path, record) -> None:
    """One row per step: t, the mean vector, the covariance entries in
    row-major order, and the second moment."""
    d = record.means.shape[1]
    header = (
        ["t"]
        + [f"mean_{i + 1}" for i in range(d)]
        + [f"cov_{i + 1}{j + 1}" for i in range(d) for j in range(d)]
        + ["m2"]
    )
    lines = [",".join(header)]
    for k in range(record.times.size):
        cells = [_fmt(record.times[k])]
        cells += [_fmt(v) for v in record.means[k]]
        cells += [_fmt(v) for v in record.covs[k].reshape(-1)]
        cells.append(_fmt(record.second_moments[k]))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_paths_bin(path, record) -> None:
    """Little-endian float64 dump of the full path array, [step][particle]
    [dim] row-major, with a JSON sidecar describing the layout."""
    if record.paths is None:
        raise ScenarioError("record has no stored paths; enable record_paths")
    path = Path(path)
    arr = np.ascontiguousarray(record.paths, dtype="<f8")
    path.write_bytes(arr.tobytes(order="C"))
    sidecar = {
        "dtype": "<f8",
        "order": "C",
        "layout": ["step", "particle", "dim"],
        "shape": list(arr.shape),
        "t0": float(record.times[0]),
        "dt": float(record.times[1] - record.times[0]) if record.times.size > 1 else 0.0,
    }
    write_json(path.with_suffix(".json"), sidecar)


def write_difference_csv(path, trace) -> None:
    lines = ["t,trace"]
    for t, v in zip(trace.times, trace.values):
        lines.append(f"{_fmt(t)},{_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_grid_field_csv(path, field, grad) -> None:
    """One row per (t, x) grid node: t, x, u, du_dx."""
    lines = ["t,x,u,du_dx"]
    for k in range(field.times.size):
        tk = _fmt(field.times[k])
        for j in range(field.xs.size):
            lines.append(
                f"{tk},{_fmt(field.xs[j])},{_fmt(field.u[k, j])},"
                f"{_fmt(grad.du_dx[k, j])}"
            )
    Path(path).write_text("\n".join(lines) + "\n")
