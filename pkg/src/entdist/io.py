"""Flat-file serialisation: trajectory CSV/JSON, concurrence CSV, reports.

All writers are deterministic (fixed float formats, sorted JSON keys) so a
repeated run with the same inputs reproduces byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import AmplitudeTrajectory, TimeGrid
from .entanglement import (
    PARTITIONS,
    EventReport,
    InitialState,
    concurrence_series,
    identity_residual_series,
)
from .errors import InputError
from .spectral import SpectralModel, from_mapping

__all__ = [
    "write_trajectory_csv",
    "write_trajectory_json",
    "read_trajectory",
    "write_concurrence_csv",
    "write_event_report",
    "write_sweep_surface",
    "write_sweep_summary",
    "write_manifest",
]

_FLOAT = "%.16e"

TRAJECTORY_COLUMNS = ("t", "re_b", "im_b", "population", "b_tilde")
CONCURRENCE_COLUMNS = ("t", "c_q1q2", "c_r1r2", "c_q1r1", "c_q1r2", "identity_residual")


def _fmt(x: float) -> str:
    return _FLOAT % x


def write_trajectory_csv(traj: AmplitudeTrajectory, path: str | Path) -> Path:
    """Columns: t, Re b, Im b, |b|^2, b_tilde."""
    path = Path(path)
    times = traj.times
    pop = traj.population
    bt = traj.b_tilde
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for i in range(times.size):
            writer.writerow(
                (_fmt(times[i]), _fmt(traj.b[i].real), _fmt(traj.b[i].imag), _fmt(pop[i]), _fmt(bt[i]))
            )
    return path


def _json_safe(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return None  # bulk arrays live in the CSV, not the envelope
    if isinstance(value, dict):
        out = {k: _json_safe(v) for k, v in value.items()}
        return {k: v for k, v in out.items() if v is not None}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_trajectory_json(traj: AmplitudeTrajectory, path: str | Path) -> Path:
    """Structured envelope: model provenance, grid, solver error estimate."""
    path = Path(path)
    payload = {
        "schema": "entdist-trajectory/1",
        "model": traj.model.to_dict() if traj.model is not None else None,
        "omega0": traj.omega0,
        "grid": {"t_max": traj.grid.t_max, "n_steps": traj.grid.n_steps},
        "provenance": traj.provenance,
        "error_estimate": None if np.isnan(traj.error_estimate) else traj.error_estimate,
        "meta": _json_safe(traj.meta),
        "columns": list(TRAJECTORY_COLUMNS),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def read_trajectory(csv_path: str | Path, json_path: str | Path) -> AmplitudeTrajectory:
    """Rebuild a trajectory from its CSV/JSON pair."""
    envelope = json.loads(Path(json_path).read_text())
    data = np.genfromtxt(csv_path, delimiter=",", skip_header=1)
    if data.ndim != 2 or data.shape[1] != len(TRAJECTORY_COLUMNS):
        raise InputError(f"unexpected trajectory CSV shape {data.shape}")
    grid = TimeGrid(envelope["grid"]["t_max"], envelope["grid"]["n_steps"])
    model = from_mapping(envelope["model"]) if envelope.get("model") else None
    err = envelope.get("error_estimate")
    return AmplitudeTrajectory(
        grid=grid,
        b=data[:, 1] + 1j * data[:, 2],
        omega0=envelope["omega0"],
        model=model,
        error_estimate=float("nan") if err is None else err,
        provenance=envelope.get("provenance", "unknown"),
        meta=envelope.get("meta", {}),
    )


def write_concurrence_csv(
    state: InitialState, traj: AmplitudeTrajectory, path: str | Path
) -> tuple[Path, float]:
    """Per-time concurrences of the four partitions plus the identity residual.

    Returns the path and the largest absolute residual, which callers gate
    against their tolerance.
    """
    path = Path(path)
    times = traj.times
    series = concurrence_series(state, traj)
    residuals = identity_residual_series(state, traj)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CONCURRENCE_COLUMNS)
        for i in range(times.size):
            writer.writerow(
                (
                    _fmt(times[i]),
                    _fmt(series["q1q2"][i]),
                    _fmt(series["r1r2"][i]),
                    _fmt(series["q1r1"][i]),
                    _fmt(series["q1r2"][i]),
                    _fmt(residuals[i]),
                )
            )
    return path, float(np.max(np.abs(residuals)))


def write_event_report(report: EventReport, path: str | Path, extra: dict | None = None) -> Path:
    path = Path(path)
    payload = report.to_dict()
    if extra:
        payload.update(_json_safe(extra))
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def write_sweep_surface(
    alphas: np.ndarray, times: np.ndarray, surface: np.ndarray, path: str | Path
) -> Path:
    """Matrix layout for surface plots: header row of times, rows keyed by alpha."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha\\t"] + [_fmt(t) for t in times])
        for a, row in zip(alphas, surface):
            writer.writerow([_fmt(a)] + [_fmt(v) for v in row])
    return path


def write_sweep_summary(rows: list[dict], path: str | Path) -> Path:
    """One row per sweep point: plateaus, regime, event counts, residual."""
    path = Path(path)
    fieldnames = [
        "alpha",
        "regime",
        "plateau_c_q1q2",
        "plateau_c_r1r2",
        "plateau_c_q1r1",
        "plateau_c_q1r2",
        "esd_count",
        "esb_count",
        "max_identity_residual",
    ]
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            formatted = {
                k: (_fmt(v) if isinstance(v, float) else v) for k, v in row.items() if k in fieldnames
            }
            writer.writerow(formatted)
    return path


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    path: str | Path,
    config: dict,
    files: list[Path],
    extras: dict | None = None,
) -> Path:
    """Run manifest: echoed inputs, package version, output files with hashes."""
    path = Path(path)
    payload = {
        "schema": "entdist-manifest/1",
        "version": __version__,
        "inputs": _json_safe(config),
        "outputs": [
            {"file": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size} for p in sorted(files)
        ],
    }
    if extras:
        payload["diagnostics"] = _json_safe(extras)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
