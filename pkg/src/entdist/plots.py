"""Matplotlib figure rendering for run reports.

Figures are written next to the CSV output with the Agg backend, so runs
work headless.  Everything here is presentation only; the CSV/JSON files
remain the quantitative record.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg", force=False)

import matplotlib.pyplot as plt
import numpy as np

from .dynamics import AmplitudeTrajectory
from .entanglement import PARTITIONS, InitialState, concurrence_series

__all__ = [
    "save_population_figure",
    "save_concurrence_figure",
    "save_surface_figures",
]

_CHANNEL_LABELS = {
    "q1q2": r"$C_{q_1 q_2}$",
    "r1r2": r"$C_{r_1 r_2}$",
    "q1r1": r"$C_{q_1 r_1}$",
    "q1r2": r"$C_{q_1 r_2}$",
}


def save_population_figure(traj: AmplitudeTrajectory, path: str | Path) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(traj.times, traj.population, lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$|b(t)|^2$")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("excited-state population")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_concurrence_figure(state: InitialState, traj: AmplitudeTrajectory, path: str | Path) -> Path:
    path = Path(path)
    series = concurrence_series(state, traj)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name in PARTITIONS:
        ax.plot(traj.times, series[name], lw=1.2, label=_CHANNEL_LABELS[name])
    ax.set_xlabel("t")
    ax.set_ylabel("concurrence")
    ax.set_ylim(bottom=-0.02)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_surface_figures(
    alphas: np.ndarray,
    times: np.ndarray,
    surfaces: dict[str, np.ndarray],
    outdir: str | Path,
    stem: str = "surface",
) -> list[Path]:
    """One heat map per partition over the (t, alpha) plane."""
    outdir = Path(outdir)
    paths = []
    for name in PARTITIONS:
        surface = surfaces[name]
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        mesh = ax.pcolormesh(times, alphas, surface, shading="auto", cmap="viridis", vmin=0.0)
        fig.colorbar(mesh, ax=ax, label=_CHANNEL_LABELS[name])
        ax.set_xlabel("t")
        ax.set_ylabel(r"$\alpha$")
        fig.tight_layout()
        target = outdir / f"{stem}_c_{name}.png"
        fig.savefig(target, dpi=150)
        plt.close(fig)
        paths.append(target)
    return paths
