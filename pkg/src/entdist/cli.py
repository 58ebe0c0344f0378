"""Scenario runner CLI.

Verbs:
  simulate      solve one scenario and write trajectory/concurrence reports
  sweep         scan the initial-state weight alpha and write surface files
  events        print the event report (ESD/ESB, regime) for one scenario
  boundstate    report the qubit-reservoir bound state below the band
  oracle-check  compare the memory-kernel solver against the mode-sum reference

Named presets fig1..fig5b pin the bundled reference scenarios.  Precedence of
settings: built-in defaults < preset < command-line flags < --config file.
Exit codes: 0 success, 2 configuration error, 3 numerical-tolerance failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import AmplitudeTrajectory, TimeGrid, plateau, solve_amplitude
from .entanglement import (
    PARTITIONS,
    InitialState,
    concurrence_series,
    detect_events,
    identity_residual_series,
)
from .errors import AccuracyError, ConfigError, ConvergenceError, EntdistError, InputError, InstabilityError
from .oracle import oracle_comparison
from .spectral import OhmicModel, PBGModel, SpectralModel, bound_state_energy, from_mapping, parse_model_spec
from . import io as eio

__all__ = ["main", "ScenarioConfig", "PRESETS", "run_scenario", "run_sweep"]

DEFAULT_ALPHA_RANGE = (0.02, 0.99, 60)


def _preset(model: str, omega0: float, t_max: float, n_steps: int, alpha: float | None = None, sweep: bool = False):
    return {
        "model": model,
        "omega0": omega0,
        "t_max": t_max,
        "n_steps": n_steps,
        "alpha": alpha,
        "sweep": sweep,
    }


_PBG = "pbg:eta=0.2,omega_c=1,kappa_max=10"

PRESETS: dict[str, dict] = {
    # band-gap reservoir, qubit inside the gap: stable distribution regimes
    "fig1": _preset(_PBG, 0.1, 50.0, 5000, sweep=True),
    # band-gap reservoir, qubit inside the band: complete transfer regimes
    "fig2": _preset(_PBG, 10.0, 50.0, 5000, sweep=True),
    "fig3a": _preset(_PBG, 0.1, 50.0, 5000, alpha=1.0 / math.sqrt(2.0)),
    "fig3b": _preset(_PBG, 10.0, 50.0, 5000, alpha=1.0 / math.sqrt(2.0)),
    "fig4a": _preset(_PBG, 0.1, 50.0, 5000, alpha=1.0 / math.sqrt(2.0)),
    "fig4b": _preset(_PBG, 0.1, 50.0, 5000, alpha=0.57),
    "fig4c": _preset(_PBG, 0.1, 50.0, 5000, alpha=0.28),
    # Ohmic reservoirs at the two reference coupling/cutoff pairs
    "fig5a": _preset("ohmic:eta=0.1,Lambda=5", 1.0, 20.0, 4000, alpha=0.55),
    "fig5b": _preset("ohmic:eta=0.3,Lambda=10", 1.0, 20.0, 4000, alpha=0.55),
}


@dataclass
class ScenarioConfig:
    """Resolved settings for one run."""

    model: SpectralModel
    omega0: float
    grid: TimeGrid
    alpha: float | None = None
    alphas: np.ndarray | None = None
    outdir: Path = Path("entdist-out")
    workers: int = 1
    identity_tol: float = 1e-10
    figures: bool = True
    estimate_error: bool = True
    preset: str | None = None

    def state(self) -> InitialState:
        if self.alpha is None:
            raise ConfigError("this command needs --alpha (the preset defines none)")
        return InitialState.from_alpha(self.alpha)

    def describe(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "omega0": self.omega0,
            "grid": {"t_max": self.grid.t_max, "n_steps": self.grid.n_steps},
            "alpha": self.alpha,
            "alphas": None if self.alphas is None else [float(a) for a in self.alphas],
            "workers": self.workers,
            "identity_tol": self.identity_tol,
            "figures": self.figures,
            "preset": self.preset,
            "version": __version__,
        }


def _alpha_grid(spec) -> np.ndarray:
    if isinstance(spec, (list, tuple)) and len(spec) == 3:
        lo, hi, count = float(spec[0]), float(spec[1]), int(spec[2])
    elif isinstance(spec, dict):
        lo, hi, count = float(spec["min"]), float(spec["max"]), int(spec["count"])
    else:
        raise ConfigError(f"alpha range must be (min, max, count), got {spec!r}")
    if not (0.0 < lo < hi < 1.0) or count < 1:
        raise ConfigError("alpha range must satisfy 0 < min < max < 1 and count >= 1")
    return np.linspace(lo, hi, count)


def _load_config_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON (line {exc.lineno}, col {exc.colno})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def _resolve_config(args: argparse.Namespace, need_sweep: bool = False) -> ScenarioConfig:
    """Merge defaults, preset, flags and config file (in increasing precedence)."""
    layers: dict = {}
    if args.preset:
        preset = PRESETS.get(args.preset)
        if preset is None:
            raise ConfigError(f"unknown preset {args.preset!r}; choose from {', '.join(sorted(PRESETS))}")
        layers.update({k: v for k, v in preset.items() if v is not None})
    for key in ("model", "omega0", "alpha", "t_max", "n_steps", "outdir", "workers", "identity_tol"):
        value = getattr(args, key, None)
        if value is not None:
            layers[key] = value
    if getattr(args, "alpha_range", None) is not None:
        layers["alphas"] = args.alpha_range
    if getattr(args, "no_figures", False):
        layers["figures"] = False
    if getattr(args, "fast", False):
        layers["estimate_error"] = False
    if getattr(args, "config", None):
        file_layer = _load_config_file(args.config)
        unknown = set(file_layer) - {
            "model",
            "omega0",
            "alpha",
            "alphas",
            "t_max",
            "n_steps",
            "outdir",
            "workers",
            "identity_tol",
            "figures",
            "estimate_error",
        }
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        layers.update(file_layer)

    try:
        model_spec = layers["model"]
    except KeyError:
        raise ConfigError("no model given: use --preset, --model or a config file") from None
    try:
        model = from_mapping(model_spec) if isinstance(model_spec, dict) else parse_model_spec(str(model_spec))
    except InputError as exc:
        raise ConfigError(str(exc)) from exc

    try:
        omega0 = float(layers.get("omega0", 1.0))
        grid = TimeGrid(float(layers.get("t_max", 20.0)), int(layers.get("n_steps", 4000)))
    except (InputError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid or omega0: {exc}") from exc

    alpha = layers.get("alpha")
    if alpha is not None:
        alpha = float(alpha)
        if not 0.0 < alpha < 1.0:
            raise ConfigError(f"alpha must lie strictly inside (0, 1), got {alpha}")

    alphas = None
    if need_sweep:
        alphas = _alpha_grid(layers.get("alphas", DEFAULT_ALPHA_RANGE))

    workers = int(layers.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")

    return ScenarioConfig(
        model=model,
        omega0=omega0,
        grid=grid,
        alpha=alpha,
        alphas=alphas,
        outdir=Path(layers.get("outdir", "entdist-out")),
        workers=workers,
        identity_tol=float(layers.get("identity_tol", 1e-10)),
        figures=bool(layers.get("figures", True)),
        estimate_error=bool(layers.get("estimate_error", True)),
        preset=args.preset,
    )


def _solve(config: ScenarioConfig) -> AmplitudeTrajectory:
    return solve_amplitude(
        config.model, config.omega0, config.grid, estimate_error=config.estimate_error
    )


def _check_identity(residual_max: float, tol: float) -> None:
    if residual_max > tol:
        raise AccuracyError(
            f"identity residual {residual_max:.3e} exceeds tolerance {tol:.1e}", estimate=residual_max
        )


def run_scenario(config: ScenarioConfig) -> dict:
    """Solve one scenario and write the full report set into ``outdir``."""
    state = config.state()
    traj = _solve(config)
    outdir = config.outdir
    outdir.mkdir(parents=True, exist_ok=True)

    files = [
        eio.write_trajectory_csv(traj, outdir / "trajectory.csv"),
        eio.write_trajectory_json(traj, outdir / "trajectory.json"),
    ]
    conc_path, residual_max = eio.write_concurrence_csv(state, traj, outdir / "concurrence.csv")
    files.append(conc_path)
    report = detect_events(state, traj)
    files.append(
        eio.write_event_report(
            report,
            outdir / "events.json",
            extra={"alpha": config.alpha, "model": config.model.to_dict(), "omega0": config.omega0},
        )
    )
    if config.figures:
        from . import plots

        files.append(plots.save_population_figure(traj, outdir / "population.png"))
        files.append(plots.save_concurrence_figure(state, traj, outdir / "concurrence.png"))

    level = plateau(traj)
    diagnostics = {
        "regime": report.regime,
        "plateau_population": level.value,
        "plateau_population_std": level.std,
        "plateau_concurrences": {name: report.channels[name].plateau for name in PARTITIONS},
        "max_identity_residual": residual_max,
        "solver_error_estimate": None if np.isnan(traj.error_estimate) else traj.error_estimate,
        "kernel_error": traj.meta.get("kernel_error"),
    }
    eio.write_manifest(outdir / "manifest.json", config.describe(), files, extras=diagnostics)

    print(f"regime: {report.regime}")
    print(
        "plateau concurrences: "
        + ", ".join(f"{name}={report.channels[name].plateau:.6f}" for name in PARTITIONS)
    )
    print(f"max identity residual: {residual_max:.3e}")
    if not np.isnan(traj.error_estimate):
        print(f"solver error estimate: {traj.error_estimate:.3e}")
    print(f"wrote {len(files) + 1} files to {outdir}")

    _check_identity(residual_max, config.identity_tol)
    return diagnostics


def run_sweep(config: ScenarioConfig) -> dict:
    """Scan alpha over one solved trajectory and write surface + summary files."""
    if config.alphas is None or len(config.alphas) == 0:
        raise ConfigError("sweep needs a nonempty alpha range")
    traj = _solve(config)
    outdir = config.outdir
    outdir.mkdir(parents=True, exist_ok=True)
    times = traj.times
    alphas = np.asarray(config.alphas, dtype=float)

    surfaces = {name: np.empty((alphas.size, times.size)) for name in PARTITIONS}
    rows: list[dict | None] = [None] * alphas.size

    def one_point(i: int) -> None:
        state = InitialState.from_alpha(float(alphas[i]))
        series = concurrence_series(state, traj)
        residuals = identity_residual_series(state, traj)
        report = detect_events(state, traj)
        for name in PARTITIONS:
            surfaces[name][i] = series[name]
        rows[i] = {
            "alpha": float(alphas[i]),
            "regime": report.regime,
            "plateau_c_q1q2": report.channels["q1q2"].plateau,
            "plateau_c_r1r2": report.channels["r1r2"].plateau,
            "plateau_c_q1r1": report.channels["q1r1"].plateau,
            "plateau_c_q1r2": report.channels["q1r2"].plateau,
            "esd_count": len(report.esd_intervals),
            "esb_count": len(report.esb_onsets),
            "max_identity_residual": float(np.max(np.abs(residuals))),
        }

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(one_point, range(alphas.size)))
    else:
        for i in range(alphas.size):
            one_point(i)

    files = [
        eio.write_trajectory_csv(traj, outdir / "trajectory.csv"),
        eio.write_trajectory_json(traj, outdir / "trajectory.json"),
    ]
    for name in PARTITIONS:
        files.append(eio.write_sweep_surface(alphas, times, surfaces[name], outdir / f"surface_c_{name}.csv"))
    files.append(eio.write_sweep_summary([r for r in rows if r is not None], outdir / "sweep_summary.csv"))
    if config.figures:
        from . import plots

        files.append(plots.save_population_figure(traj, outdir / "population.png"))
        files.extend(plots.save_surface_figures(alphas, times, surfaces, outdir))

    residual_max = max(row["max_identity_residual"] for row in rows if row is not None)
    level = plateau(traj)
    diagnostics = {
        "plateau_population": level.value,
        "max_identity_residual": residual_max,
        "solver_error_estimate": None if np.isnan(traj.error_estimate) else traj.error_estimate,
        "kernel_error": traj.meta.get("kernel_error"),
        "regimes": {f"{row['alpha']:.6f}": row["regime"] for row in rows if row is not None},
    }
    eio.write_manifest(outdir / "manifest.json", config.describe(), files, extras=diagnostics)

    print(f"swept {alphas.size} alpha points over {times.size} grid times")
    print(f"plateau population: {level.value:.6f}")
    print(f"max identity residual: {residual_max:.3e}")
    print(f"wrote {len(files) + 1} files to {outdir}")

    _check_identity(residual_max, config.identity_tol)
    return diagnostics


def cmd_simulate(args) -> int:
    run_scenario(_resolve_config(args))
    return 0


def cmd_sweep(args) -> int:
    run_sweep(_resolve_config(args, need_sweep=True))
    return 0


def cmd_events(args) -> int:
    config = _resolve_config(args)
    state = config.state()
    traj = _solve(config)
    report = detect_events(state, traj)
    residuals = identity_residual_series(state, traj)
    payload = report.to_dict()
    payload["alpha"] = config.alpha
    payload["model"] = config.model.to_dict()
    payload["omega0"] = config.omega0
    payload["max_identity_residual"] = float(np.max(np.abs(residuals)))
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    _check_identity(payload["max_identity_residual"], config.identity_tol)
    return 0


def cmd_boundstate(args) -> int:
    config = _resolve_config(args)
    model = config.model
    energy = bound_state_energy(model, config.omega0)
    payload: dict = {
        "model": model.to_dict(),
        "omega0": config.omega0,
        "present": energy is not None,
        "energy": energy,
        "band_min": model.band_min,
    }
    if energy is not None:
        payload["fixed_point_residual"] = energy - config.omega0 - model.level_shift(energy)
    if isinstance(model, OhmicModel):
        payload["criterion_eta_cutoff_minus_omega0"] = model.eta * model.cutoff - config.omega0
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_oracle_check(args) -> int:
    config = _resolve_config(args)
    band = tuple(args.band) if args.band else None
    result = oracle_comparison(config.model, config.omega0, config.grid, args.n_modes, band=band)
    payload = {
        "model": config.model.to_dict(),
        "omega0": config.omega0,
        "n_modes": args.n_modes,
        "band": list(band) if band else None,
        "recurrence_time": result["recurrence_time"],
        "window_t_max": result["window_t_max"],
        "window_max_gap": result["window_max_gap"],
        "full_max_gap": result["full_max_gap"],
        "max_norm_deviation": result["max_norm_deviation"],
        "tolerance": args.tol,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.outdir:
        outdir = Path(args.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        eio.write_trajectory_csv(result["volterra"], outdir / "volterra.csv")
        eio.write_trajectory_csv(result["reference"], outdir / "mode_sum.csv")
    if not (result["window_max_gap"] <= args.tol):
        raise AccuracyError(
            f"solver disagrees with the mode-sum reference by {result['window_max_gap']:.3e} "
            f"(tolerance {args.tol:.1e})",
            estimate=result["window_max_gap"],
        )
    return 0


def _add_common(parser: argparse.ArgumentParser, with_alpha: bool = True) -> None:
    parser.add_argument("--preset", help=f"named scenario: {', '.join(sorted(PRESETS))}")
    parser.add_argument("--model", help="model spec, e.g. 'ohmic:eta=0.3,Lambda=10' or 'pbg:eta=0.2'")
    parser.add_argument("--omega0", type=float, help="qubit transition frequency")
    if with_alpha:
        parser.add_argument("--alpha", type=float, help="initial-state weight alpha in (0,1); beta = sqrt(1-alpha^2)")
    parser.add_argument("--t-max", dest="t_max", type=float, help="grid duration")
    parser.add_argument("--n-steps", dest="n_steps", type=int, help="grid step count")
    parser.add_argument("--identity-tol", dest="identity_tol", type=float, help="per-row identity residual gate")
    parser.add_argument("--config", help="JSON config file; overrides flags")
    parser.add_argument("--fast", action="store_true", help="skip the dt/2 solver error estimate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entdist",
        description="Entanglement distribution of two qubits in independent amplitude-damping reservoirs",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="solve one scenario and write reports")
    _add_common(p)
    p.add_argument("--outdir", help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="alpha sweep with surface output")
    _add_common(p)
    p.add_argument(
        "--alpha-range",
        dest="alpha_range",
        nargs=3,
        type=float,
        metavar=("MIN", "MAX", "COUNT"),
        help=f"sweep range (default {DEFAULT_ALPHA_RANGE})",
    )
    p.add_argument("--workers", type=int, help="concurrent sweep workers")
    p.add_argument("--outdir", help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("events", help="print the ESD/ESB event report")
    _add_common(p)
    p.add_argument("--out", help="also write the report JSON here")
    p.set_defaults(func=cmd_events)

    p = sub.add_parser("boundstate", help="bound-state existence and energy")
    _add_common(p, with_alpha=False)
    p.add_argument("--out", help="also write the report JSON here")
    p.set_defaults(func=cmd_boundstate)

    p = sub.add_parser("oracle-check", help="compare solver against the mode-sum reference")
    _add_common(p, with_alpha=False)
    p.add_argument("--n-modes", dest="n_modes", type=int, default=2000, help="bath discretisation size")
    p.add_argument("--band", nargs=2, type=float, metavar=("LO", "HI"), help="sampling band")
    p.add_argument("--tol", type=float, default=1e-4, help="max allowed gap before the recurrence")
    p.add_argument("--outdir", help="write both trajectories here")
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (AccuracyError, InstabilityError, ConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except EntdistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
