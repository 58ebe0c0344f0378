"""Brute-force reference dynamics from a finitely discretised reservoir.

The reservoir is replaced by N modes sampled from the spectral density, and
the single-excitation Schroedinger equation for the (N+1)-dimensional
amplitude vector is propagated exactly with a classical fixed-step RK4.
Valid as a reference for the memory-kernel solver only before the discrete
recurrence time 2 pi / d omega.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .dynamics import AmplitudeTrajectory, TimeGrid, solve_with_kernel
from .errors import InputError, InstabilityError
from .spectral import LorentzianModel, OhmicModel, PBGModel, SingleModeModel, SpectralModel

__all__ = [
    "DiscretizedBath",
    "discretized_reference",
    "norm_check",
    "band_limited_kernel",
    "oracle_comparison",
]

MAX_MODES = 10_000

# RK4 phase accuracy requires resolving the fastest mode.
_MAX_PHASE_PER_STEP = 0.1
# Beyond this the RK4 march on the imaginary axis is outright unstable.
_STABILITY_PHASE = 2.0 * math.sqrt(2.0)


def default_band(model: SpectralModel) -> tuple[float, float]:
    """Sampling band used when none is given."""
    if isinstance(model, OhmicModel):
        return 0.0, 10.0 * model.cutoff
    if isinstance(model, PBGModel):
        return model.omega_c, model.band_top
    if isinstance(model, LorentzianModel):
        return model.omega_center - 20.0 * model.width, model.omega_center + 20.0 * model.width
    raise InputError(f"no default band for {model.variant} model")


@dataclass(frozen=True)
class DiscretizedBath:
    """N reservoir modes with frequencies and couplings g_k = sqrt(J(w_k) dw)."""

    frequencies: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        coups = np.asarray(self.couplings, dtype=float)
        if freqs.ndim != 1 or freqs.shape != coups.shape or freqs.size < 1:
            raise InputError("frequencies and couplings must be equal-length 1-d arrays")
        if freqs.size > MAX_MODES:
            raise InputError(f"mode count capped at {MAX_MODES}")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "couplings", coups)

    @classmethod
    def from_model(
        cls,
        model: SpectralModel,
        n_modes: int,
        band: tuple[float, float] | None = None,
    ) -> "DiscretizedBath":
        """Midpoint sampling of J over ``band`` (model default when omitted)."""
        if isinstance(model, SingleModeModel):
            return cls(np.array([model.omega_mode]), np.array([model.g]))
        lo, hi = band if band is not None else default_band(model)
        if not (hi > lo):
            raise InputError("band must satisfy hi > lo")
        d_omega = (hi - lo) / n_modes
        freqs = lo + (np.arange(n_modes) + 0.5) * d_omega
        couplings = np.sqrt(model.density(freqs) * d_omega)
        return cls(freqs, couplings)

    @property
    def d_omega(self) -> float:
        if self.frequencies.size < 2:
            return math.inf
        return float(self.frequencies[1] - self.frequencies[0])

    @property
    def recurrence_time(self) -> float:
        """~2 pi / d omega; the mode comb rephases and the reference degrades."""
        d = self.d_omega
        return math.inf if not math.isfinite(d) else 2.0 * math.pi / d

    def total_weight(self) -> float:
        """sum g_k^2, the sampled approximation of integral J."""
        return float(np.sum(self.couplings**2))

    def kernel(self, s: np.ndarray) -> np.ndarray:
        """Discrete kernel sum g_k^2 exp(-i w_k s) (rephases at the recurrence)."""
        s = np.asarray(s, dtype=float)
        return np.exp(-1j * np.outer(s, self.frequencies)) @ self.couplings**2


def discretized_reference(
    bath: DiscretizedBath,
    omega0: float,
    grid: TimeGrid,
    substeps: int | None = None,
    keep_modes: bool = False,
) -> AmplitudeTrajectory:
    """Propagate the exact (N+1)-mode amplitudes and return b(t).

    RK4 with internal substeps chosen so the fastest phase advances at most
    0.1 rad per step; forcing coarser ``substeps`` raises InstabilityError
    when the march would leave the RK4 stability region.  The trajectory's
    meta carries the recurrence time, per-step norm history and (optionally)
    the full mode amplitudes.
    """
    if not math.isfinite(omega0) or omega0 <= 0.0:
        raise InputError(f"omega0 must be positive and finite, got {omega0!r}")
    freqs = bath.frequencies
    coups = bath.couplings
    max_omega = float(max(np.max(np.abs(freqs)), omega0))
    dt = grid.dt
    if substeps is None:
        substeps = max(1, math.ceil(dt * max_omega / _MAX_PHASE_PER_STEP))
    elif dt * max_omega / substeps > _STABILITY_PHASE:
        raise InstabilityError(
            f"dt*max_omega/substeps = {dt * max_omega / substeps:.3f} exceeds the RK4 "
            f"stability bound {_STABILITY_PHASE:.3f}; increase substeps or refine the grid"
        )
    h = dt / substeps

    def rhs(vec: np.ndarray) -> np.ndarray:
        out = np.empty_like(vec)
        out[0] = -1j * omega0 * vec[0] - 1j * np.dot(coups, vec[1:])
        out[1:] = -1j * freqs * vec[1:] - 1j * coups * vec[0]
        return out

    n_steps = grid.n_steps
    vec = np.zeros(freqs.size + 1, dtype=complex)
    vec[0] = 1.0
    b = np.empty(n_steps + 1, dtype=complex)
    b[0] = 1.0
    norms = np.empty(n_steps + 1)
    norms[0] = 1.0
    reservoir_population = np.empty(n_steps + 1)
    reservoir_population[0] = 0.0
    modes = np.empty((n_steps + 1, freqs.size), dtype=complex) if keep_modes else None
    if modes is not None:
        modes[0] = 0.0
    for n in range(n_steps):
        for _ in range(substeps):
            k1 = rhs(vec)
            k2 = rhs(vec + 0.5 * h * k1)
            k3 = rhs(vec + 0.5 * h * k2)
            k4 = rhs(vec + h * k3)
            vec = vec + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        b[n + 1] = vec[0]
        norms[n + 1] = float(np.linalg.norm(vec))
        reservoir_population[n + 1] = float(np.sum(np.abs(vec[1:]) ** 2))
        if modes is not None:
            modes[n + 1] = vec[1:]
    meta = {
        "recurrence_time": bath.recurrence_time,
        "norm_history": norms,
        "reservoir_population": reservoir_population,
        "substeps": substeps,
        "n_modes": int(freqs.size),
    }
    if modes is not None:
        meta["mode_amplitudes"] = modes
    # rounding can push |b| a hair above 1; clip inside unitarity tolerance
    scale = np.abs(b)
    overshoot = scale.max() - 1.0
    if overshoot > 1e-8:
        raise InstabilityError(f"mode propagation left the unit ball by {overshoot:.2e}")
    b = np.where(scale > 1.0, b / scale, b)
    return AmplitudeTrajectory(
        grid=grid,
        b=b,
        omega0=omega0,
        model=None,
        provenance="mode-sum",
        meta=meta,
    )


def norm_check(traj: AmplitudeTrajectory) -> float:
    """max over t of | ||amplitude vector|| - 1 | for a mode-sum trajectory."""
    meta = traj.meta
    if "mode_amplitudes" in meta:
        norms = np.sqrt(np.abs(traj.b) ** 2 + np.sum(np.abs(meta["mode_amplitudes"]) ** 2, axis=1))
    elif "norm_history" in meta:
        norms = np.asarray(meta["norm_history"])
    else:
        raise InputError("trajectory carries no mode-propagation norm data")
    return float(np.max(np.abs(norms - 1.0)))


def band_limited_kernel(model: SpectralModel, band: tuple[float, float]):
    """Continuum kernel of J restricted to ``band``: integral_band J e^{-iws} dw.

    Closed form for the Ohmic model; the band-gap kernel is natively band
    limited so it is returned unchanged when the band covers its support.
    Other models fall back to slow direct quadrature (test-scale only).
    """
    lo, hi = band
    if not hi > lo:
        raise InputError("band must satisfy hi > lo")
    if isinstance(model, OhmicModel):
        eta, cut = model.eta, model.cutoff
        lo_eff = max(0.0, lo)

        def kernel(s: np.ndarray) -> np.ndarray:
            z = 1.0 / cut + 1j * np.asarray(s, dtype=float)
            upper = np.exp(-z * hi) * (1.0 + z * hi)
            lower = np.exp(-z * lo_eff) * (1.0 + z * lo_eff)
            return eta * (lower - upper) / z**2

        return kernel
    if isinstance(model, PBGModel) and lo <= model.omega_c and hi >= model.band_top:
        return lambda s: model.kernel_grid(s)
    if isinstance(model, SingleModeModel):
        if lo <= model.omega_mode <= hi:
            return lambda s: model.kernel_grid(s)[0]
        return lambda s: np.zeros(np.asarray(s).shape, dtype=complex)

    def slow_kernel(s: np.ndarray) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s.shape, dtype=complex)
        for i, si in enumerate(s):
            re, _ = integrate.quad(lambda w: model.density(w), lo, hi, weight="cos", wvar=si, limit=400)
            im, _ = integrate.quad(lambda w: model.density(w), lo, hi, weight="sin", wvar=si, limit=400)
            out[i] = re - 1j * im
        return out

    return slow_kernel


def oracle_comparison(
    model: SpectralModel,
    omega0: float,
    grid: TimeGrid,
    n_modes: int,
    band: tuple[float, float] | None = None,
) -> dict:
    """Solve the same band-limited problem both ways and report the gap.

    The mode-sum propagation and the memory-kernel solve share the sampling
    band, so the only discrepancies are solver error and bath discretisation;
    the comparison window stops at half the recurrence time.
    """
    if band is None:
        band = default_band(model)
    bath = DiscretizedBath.from_model(model, n_modes, band)
    reference = discretized_reference(bath, omega0, grid)
    volterra = solve_with_kernel(
        band_limited_kernel(model, band), omega0, grid, estimate_error=False, model=model
    )
    t_half = 0.5 * bath.recurrence_time
    window = grid.times() <= t_half
    gap = np.abs(volterra.b - reference.b)
    return {
        "bath": bath,
        "reference": reference,
        "volterra": volterra,
        "recurrence_time": bath.recurrence_time,
        "window_max_gap": float(gap[window].max()) if window.any() else math.nan,
        "full_max_gap": float(gap.max()),
        "window_t_max": float(min(t_half, grid.t_max)),
        "max_norm_deviation": norm_check(reference),
    }
