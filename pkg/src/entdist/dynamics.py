"""Exact single-pair decay dynamics.

The excited-state amplitude b(t) obeys a Volterra integro-differential
equation,

    db/dt + i omega0 b + integral_0^t b(tau) f(t - tau) d tau = 0,  b(0) = 1,

with f the reservoir memory kernel.  The solver works in the rotating frame
B(t) = exp(i omega0 t) b(t), where the convolution kernel becomes
g(s) = f(s) exp(i omega0 s) and the fast free phase drops out, and marches
with a trapezoidal predictor-corrector (second order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError, InstabilityError
from .spectral import SpectralModel, kernel_on_grid

__all__ = [
    "TimeGrid",
    "AmplitudeTrajectory",
    "MasterCoefficients",
    "PlateauEstimate",
    "solve_amplitude",
    "solve_with_kernel",
    "master_coefficients",
    "plateau",
]

# |b| may exceed 1 by at most this much before the march is declared unstable.
_STABILITY_SLACK = 1e-6


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [0, t_max] with n_steps intervals."""

    t_max: float
    n_steps: int

    def __post_init__(self):
        if not math.isfinite(self.t_max) or self.t_max <= 0.0:
            raise InputError(f"t_max must be positive and finite, got {self.t_max!r}")
        if self.n_steps < 2:
            raise InputError(f"n_steps must be >= 2, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_max / self.n_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_steps + 1)

    def halved(self) -> "TimeGrid":
        return TimeGrid(self.t_max, 2 * self.n_steps)


@dataclass
class AmplitudeTrajectory:
    """Solved amplitude b(t) on a uniform grid plus solver provenance.

    ``b_tilde`` is the reservoir amplitude sqrt(max(0, 1-|b|^2)), clamped so
    rounding-level overshoots of |b| above 1 do not produce NaNs.
    """

    grid: TimeGrid
    b: np.ndarray
    omega0: float
    model: SpectralModel | None = None
    error_estimate: float = math.nan
    provenance: str = "volterra"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=complex)
        if self.b.shape != (self.grid.n_steps + 1,):
            raise InputError("b must have length n_steps + 1")
        if abs(self.b[0] - 1.0) > 1e-12:
            raise InputError("b(0) must equal 1")
        self.b[0] = 1.0
        abs2 = np.abs(self.b) ** 2
        if abs2.max() > 1.0 + 1e-9:
            raise InputError(f"|b|^2 exceeds 1 by {abs2.max() - 1.0:.2e}; not a decay amplitude")

    @property
    def times(self) -> np.ndarray:
        return self.grid.times()

    @property
    def population(self) -> np.ndarray:
        """Excited-state population |b(t)|^2."""
        return np.abs(self.b) ** 2

    @property
    def b_tilde(self) -> np.ndarray:
        return np.sqrt(np.clip(1.0 - self.population, 0.0, None))


@dataclass(frozen=True)
class PlateauEstimate:
    """Mean of |b|^2 over the trailing window, with its spread as quality."""

    value: float
    std: float
    window: float


def plateau(traj: AmplitudeTrajectory, fraction: float = 0.1) -> PlateauEstimate:
    """Steady-state population read off the final ``fraction`` of the grid."""
    if not 0.0 < fraction <= 1.0:
        raise InputError("fraction must be in (0, 1]")
    n_tail = max(2, int(round(fraction * (traj.grid.n_steps + 1))))
    tail = traj.population[-n_tail:]
    return PlateauEstimate(float(tail.mean()), float(tail.std()), fraction * traj.grid.t_max)


def _march(g: np.ndarray, dt: float, omega_rot: float) -> np.ndarray:
    """Trapezoidal predictor-corrector march of the memory equation.

    Solves dB/dt = -i omega_rot B - integral_0^t g(t-tau) B(tau) d tau with the
    history integral discretised by the trapezoid rule on the same grid.
    """
    n_steps = len(g) - 1
    B = np.empty(n_steps + 1, dtype=complex)
    B[0] = 1.0
    gr = g[::-1].copy()  # contiguous reversed kernel for the convolution dots
    iw = 1j * omega_rot
    # Running convolution without its endpoint term:
    #   base_n = dt * (g_n B_0 / 2 + sum_{j=1}^{n-1} g_{n-j} B_j)
    base = 0.0 + 0.0j
    limit = 1.0 + _STABILITY_SLACK
    for n in range(n_steps):
        conv_n = base + 0.5 * dt * g[0] * B[n] if n > 0 else 0.0
        f_n = -iw * B[n] - conv_n
        predicted = B[n] + dt * f_n
        base = dt * (0.5 * g[n + 1] * B[0] + np.dot(gr[n_steps - n : n_steps], B[1 : n + 1]))
        conv_p = base + 0.5 * dt * g[0] * predicted
        f_p = -iw * predicted - conv_p
        B[n + 1] = B[n] + 0.5 * dt * (f_n + f_p)
        if abs(B[n + 1]) > limit:
            raise InstabilityError(
                f"|b| reached {abs(B[n + 1]):.6f} at step {n + 1}; "
                "reduce dt (finer n_steps) for this kernel"
            )
    return B


def _solve_once(
    kernel: Callable[[np.ndarray], tuple[np.ndarray, float]],
    omega0: float,
    grid: TimeGrid,
    rotating_frame: bool,
) -> tuple[np.ndarray, float]:
    times = grid.times()
    f_vals, kernel_err = kernel(times)
    f_vals = np.asarray(f_vals, dtype=complex)
    if rotating_frame:
        g_vals = f_vals * np.exp(1j * omega0 * times)
        B = _march(g_vals, grid.dt, 0.0)
        b = B * np.exp(-1j * omega0 * times)
    else:
        b = _march(f_vals, grid.dt, omega0)
    return b, kernel_err


def _model_kernel(model: SpectralModel) -> Callable[[np.ndarray], tuple[np.ndarray, float]]:
    return lambda s: kernel_on_grid(model, s)


def solve_amplitude(
    model: SpectralModel,
    omega0: float,
    grid: TimeGrid,
    rotating_frame: bool = True,
    estimate_error: bool = True,
) -> AmplitudeTrajectory:
    """Solve the memory equation for b(t) with the model's kernel.

    The kernel is evaluated once on the grid (and once more on the halved
    grid when ``estimate_error`` is set, for a Richardson-style comparison
    stored as ``error_estimate``).
    """
    if not math.isfinite(omega0) or omega0 <= 0.0:
        raise InputError(f"omega0 must be positive and finite, got {omega0!r}")
    return solve_with_kernel(
        _model_kernel(model),
        omega0,
        grid,
        rotating_frame=rotating_frame,
        estimate_error=estimate_error,
        model=model,
    )


def solve_with_kernel(
    kernel: Callable[[np.ndarray], tuple[np.ndarray, float]] | Callable[[np.ndarray], np.ndarray],
    omega0: float,
    grid: TimeGrid,
    rotating_frame: bool = True,
    estimate_error: bool = True,
    model: SpectralModel | None = None,
) -> AmplitudeTrajectory:
    """Solve with an explicit kernel callable s_array -> f values.

    Secondary entry point used when the kernel does not come from one of the
    spectral models, e.g. the band-limited kernels of the mode-sum oracle.
    The callable may return either the value array or (values, error).
    """

    def wrapped(s: np.ndarray) -> tuple[np.ndarray, float]:
        out = kernel(s)
        if isinstance(out, tuple):
            return out
        return out, 0.0

    b, kernel_err = _solve_once(wrapped, omega0, grid, rotating_frame)
    overshoot = float(np.max(np.abs(b) ** 2)) - 1.0
    if overshoot > 1e-9:
        raise InstabilityError(
            f"|b|^2 overshoots 1 by {overshoot:.2e}; reduce dt (finer n_steps) for this kernel"
        )
    estimate = math.nan
    if estimate_error:
        b_half, _ = _solve_once(wrapped, omega0, grid.halved(), rotating_frame)
        estimate = float(np.max(np.abs(b - b_half[::2])))
    traj = AmplitudeTrajectory(
        grid=grid,
        b=b,
        omega0=omega0,
        model=model,
        error_estimate=estimate,
        provenance="volterra" if model is not None else "volterra-custom-kernel",
        meta={"rotating_frame": rotating_frame, "scheme": "trapezoid-pc", "kernel_error": kernel_err},
    )
    return traj


@dataclass(frozen=True)
class MasterCoefficients:
    """Time-local master-equation coefficients extracted from a trajectory.

    ``delta`` is the Lamb-shifted frequency -Im[db/dt / b] and ``gamma`` the
    decay rate -Re[db/dt / b].  Where |b| < 1e-8 the quotient is meaningless:
    those entries are NaN and ``defined`` is False.
    """

    times: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    defined: np.ndarray


def master_coefficients(traj: AmplitudeTrajectory, amplitude_floor: float = 1e-8) -> MasterCoefficients:
    """Delta(t) and Gamma(t) via centered differences (one-sided at the ends)."""
    dt = traj.grid.dt
    db = np.gradient(traj.b, dt)
    defined = np.abs(traj.b) >= amplitude_floor
    ratio = np.full(traj.b.shape, np.nan + 1j * np.nan, dtype=complex)
    ratio[defined] = db[defined] / traj.b[defined]
    delta = np.where(defined, -np.imag(ratio), np.nan)
    gamma = np.where(defined, -np.real(ratio), np.nan)
    return MasterCoefficients(times=traj.times, delta=delta, gamma=gamma, defined=defined)
