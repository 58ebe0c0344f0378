"""Reservoir spectral-density models.

Each model defines a spectral density J(omega), the complex memory kernel

    f(s) = integral J(omega) exp(-i omega s) d omega,

and the level-shift integral used to locate qubit-reservoir bound states
below the mode band.  Frequencies are expressed in whatever unit the model
parameters use (the band-edge frequency for the band-gap model, the qubit
transition frequency for the Ohmic one); the code is unit-agnostic as long
as inputs stay consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from .errors import AccuracyError, ConvergenceError, DivergenceError, InputError

__all__ = [
    "SpectralModel",
    "PBGModel",
    "OhmicModel",
    "SingleModeModel",
    "LorentzianModel",
    "evaluate_density",
    "evaluate_kernel",
    "kernel_on_grid",
    "bound_state_energy",
    "level_shift",
    "pbg_kernel_detail",
    "cutoff_doubling_error",
    "from_mapping",
    "parse_model_spec",
]

# Gauss-Legendre rules reused by the oscillatory kernel quadrature.
_GL_BASE = leggauss(16)
_GL_FINE = leggauss(32)

# Relative self-convergence demanded of the band-gap kernel quadrature.
PBG_KERNEL_RTOL = 1e-8


def _require_positive(name: str, value: float, allow_zero: bool = False) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InputError(f"{name} must be finite, got {value!r}")
    if allow_zero:
        if value < 0.0:
            raise InputError(f"{name} must be >= 0, got {value}")
    elif value <= 0.0:
        raise InputError(f"{name} must be > 0, got {value}")
    return value


class SpectralModel:
    """Base class for reservoir spectral densities.

    Subclasses are frozen dataclasses: immutable after construction and safe
    to share between threads.  They provide ``density``, ``kernel_grid``,
    ``band_min`` and ``level_shift``; the module-level functions wrap these
    with argument validation.
    """

    variant: str = "abstract"

    def density(self, omega):
        raise NotImplementedError

    def kernel_grid(self, s: np.ndarray) -> tuple[np.ndarray, float]:
        """Kernel values on a grid of delays plus a quadrature error estimate.

        Closed-form models report an error of 0.0.
        """
        raise NotImplementedError

    @property
    def band_min(self) -> float | None:
        """Lower edge of the mode band; None when the support is unbounded below."""
        return None

    @property
    def frequency_unit(self) -> float:
        """Characteristic frequency used to scale brackets and tolerances."""
        raise NotImplementedError

    def level_shift(self, energy: float) -> float:
        """integral J(omega) / (energy - omega) d omega, for energy below the band."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        out = {"variant": self.variant}
        for f in fields(self):  # type: ignore[arg-type]
            out[f.name] = getattr(self, f.name)
        return out

    def label(self) -> str:
        params = ", ".join(f"{k}={v:g}" for k, v in self.to_dict().items() if k != "variant")
        return f"{self.variant}({params})"


@dataclass(frozen=True)
class OhmicModel(SpectralModel):
    """Ohmic density with exponential cutoff: J(omega) = eta * omega * exp(-omega/cutoff)."""

    eta: float
    cutoff: float

    variant = "ohmic"

    def __post_init__(self):
        _require_positive("eta", self.eta, allow_zero=True)
        _require_positive("cutoff", self.cutoff)

    def density(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = np.where(omega > 0.0, self.eta * omega * np.exp(-np.clip(omega, 0.0, None) / self.cutoff), 0.0)
        return out if out.ndim else float(out)

    def kernel_grid(self, s):
        # integral_0^inf eta w exp(-w/cutoff) exp(-i w s) dw = eta cutoff^2 / (1 + i cutoff s)^2
        s = np.asarray(s, dtype=float)
        vals = self.eta * self.cutoff**2 / (1.0 + 1j * self.cutoff * s) ** 2
        return vals, 0.0

    @property
    def band_min(self):
        return 0.0

    @property
    def frequency_unit(self):
        return self.cutoff

    def level_shift(self, energy):
        # For E < 0, a = -E:  shift = -eta * (cutoff - a * exp(a/cutoff) * E1(a/cutoff))
        if energy >= 0.0:
            raise InputError("level shift defined only below the band (E < 0)")
        z = -energy / self.cutoff
        return -self.eta * self.cutoff * (1.0 - z * _scaled_e1(z))


def _scaled_e1(z: float) -> float:
    """exp(z) * E1(z) for z > 0, stable against overflow at large z."""
    if z <= 50.0:
        return math.exp(z) * special.exp1(z)
    # Asymptotic series E1(z) ~ exp(-z)/z * sum (-1)^k k!/z^k; truncated term < 1e-16 for z > 50.
    acc, term = 0.0, 1.0
    for k in range(21):
        acc += term
        term *= -(k + 1) / z
    return acc / z


@dataclass(frozen=True)
class PBGModel(SpectralModel):
    """Band-edge reservoir of a photonic band-gap medium.

    Dispersion near the upper band edge: omega(kappa) = omega_c (1 + (kappa-1)^2)
    with kappa the wave vector in units of its band-edge value.  The kernel is

        f(s) = eta omega_c^2 int_0^kappa_max kappa^2/(1+(kappa-1)^2)
                                exp(-i (1+(kappa-1)^2) omega_c s) d kappa,

    evaluated by phase-adaptive composite Gauss-Legendre panels.  The density
    diverges as (omega - omega_c)^(-1/2) at the edge.
    """

    eta: float
    omega_c: float = 1.0
    kappa_max: float = 10.0

    variant = "pbg"

    def __post_init__(self):
        _require_positive("eta", self.eta, allow_zero=True)
        _require_positive("omega_c", self.omega_c)
        if not math.isfinite(self.kappa_max) or self.kappa_max <= 1.0:
            raise InputError(f"kappa_max must be > 1, got {self.kappa_max}")

    @property
    def band_top(self) -> float:
        return self.omega_c * (1.0 + (self.kappa_max - 1.0) ** 2)

    def density(self, omega):
        omega_arr = np.asarray(omega, dtype=float)
        if np.any(omega_arr == self.omega_c):
            raise DivergenceError(
                "density diverges as (omega-omega_c)^(-1/2) at the band edge; "
                "evaluate it only away from omega == omega_c"
            )
        out = np.zeros_like(omega_arr, dtype=float)
        above = omega_arr > self.omega_c
        if np.any(above):
            x = np.sqrt(omega_arr[above] / self.omega_c - 1.0)
            contrib = np.where(x <= 1.0, (1.0 - x) ** 2, 0.0)
            contrib = contrib + np.where(x <= self.kappa_max - 1.0, (1.0 + x) ** 2, 0.0)
            out[above] = self.eta * self.omega_c * contrib / (2.0 * x * (1.0 + x**2))
        return out if out.ndim else float(out)

    def _panel_edges(self, s: float) -> np.ndarray:
        """Panel boundaries in u = kappa-1 magnitude for one side of the edge.

        Boundaries are uniform in the local phase (kappa-1)^2 omega_c s, one
        panel per 2 pi, capped at width 0.5 so the rational prefactor is
        resolved even when the phase is slow.
        """
        u_max = max(1.0, self.kappa_max - 1.0)
        width_cap = np.arange(0.0, u_max, 0.5)
        theta_max = self.omega_c * s * u_max**2
        if theta_max > 2.0 * math.pi:
            n_phase = int(theta_max / (2.0 * math.pi)) + 1
            phase = np.sqrt(np.arange(1, n_phase) * 2.0 * math.pi / (self.omega_c * s))
            edges = np.unique(np.concatenate([width_cap, phase[phase < u_max], [u_max]]))
        else:
            edges = np.unique(np.concatenate([width_cap, [u_max]]))
        return edges

    def _node_set(self, s: float, rule) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes in u = kappa-1 (both sides of the edge) and weights."""
        nodes, weights = rule
        edges = self._panel_edges(s)
        a, b = edges[:-1], edges[1:]
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        u = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        w = (half[:, None] * weights[None, :]).ravel()
        # u covers [0, max(1, kappa_max-1)]; fold in both branches kappa = 1 +- u
        u_top = self.kappa_max - 1.0
        shape = np.where(u <= u_top, (1.0 + u) ** 2, 0.0) + np.where(u <= 1.0, (1.0 - u) ** 2, 0.0)
        return u, w * shape / (1.0 + u**2)

    def _kernel_block(self, s_block: np.ndarray, rule) -> np.ndarray:
        """Kernel on a batch of delays sharing one panel set (built for max s)."""
        u, w = self._node_set(float(s_block.max()), rule)
        phase = np.exp(-1j * self.omega_c * np.outer(s_block, u**2))
        total = phase @ w
        return self.eta * self.omega_c**2 * np.exp(-1j * self.omega_c * s_block) * total

    def kernel_detail(self, s: float) -> tuple[complex, float]:
        """Kernel value and node-doubling error estimate at a single delay."""
        if s < 0.0:
            raise InputError("delay s must be >= 0")
        block = np.array([s], dtype=float)
        coarse = self._kernel_block(block, _GL_BASE)[0]
        fine = self._kernel_block(block, _GL_FINE)[0]
        return complex(fine), abs(fine - coarse)

    def kernel_grid(self, s, chunk: int = 128):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        vals = np.empty(s.shape, dtype=complex)
        errs = np.empty(s.shape, dtype=float)
        scale = max(self.eta * self.omega_c**2, 1e-300)
        order = np.argsort(s)  # chunks share panels sized for their largest delay
        for start in range(0, s.size, chunk):
            idx = order[start : start + chunk]
            block = s[idx]
            coarse = self._kernel_block(block, _GL_BASE)
            fine = self._kernel_block(block, _GL_FINE)
            vals[idx] = fine
            errs[idx] = np.abs(fine - coarse)
        rel = errs / np.maximum(np.abs(vals), 1e-9 * scale)
        worst = float(rel.max()) if rel.size else 0.0
        if worst > PBG_KERNEL_RTOL:
            bad = int(np.argmax(rel))
            raise AccuracyError(
                f"band-gap kernel quadrature did not converge at s={s[bad]:g} "
                f"(relative estimate {worst:.2e})",
                estimate=worst,
            )
        return vals, worst

    @property
    def band_min(self):
        return self.omega_c

    @property
    def frequency_unit(self):
        return self.omega_c

    def level_shift(self, energy):
        # shift = -eta omega_c int_{-1}^{kappa_max-1} h(u) / (delta + u^2) du with
        # h(u) = (1+u)^2/(1+u^2) and delta = 1 - E/omega_c.  The substitution
        # u = sqrt(delta) tan(v) absorbs the 1/(delta+u^2) peak exactly, so the
        # v-integrand stays smooth however close E sits to the band edge.
        if energy >= self.omega_c:
            raise InputError("level shift defined only inside the gap (E < omega_c)")
        delta = 1.0 - energy / self.omega_c
        root = math.sqrt(delta)

        def smooth(v):
            u = root * math.tan(v)
            if abs(u) > 1e-8:
                return 1.0 + 2.0 / (u + 1.0 / u)  # == (1+u)^2/(1+u^2), overflow-safe
            return 1.0 + 2.0 * u / (1.0 + u * u)

        v_lo = math.atan(-1.0 / root)
        v_hi = math.atan((self.kappa_max - 1.0) / root)
        val, _ = integrate.quad(smooth, v_lo, v_hi, limit=200)
        return -self.eta * self.omega_c * val / root


@dataclass(frozen=True)
class SingleModeModel(SpectralModel):
    """Single reservoir mode: J(omega) = g^2 delta(omega - omega_mode)."""

    g: float
    omega_mode: float

    variant = "single_mode"

    def __post_init__(self):
        _require_positive("g", self.g, allow_zero=True)
        _require_positive("omega_mode", self.omega_mode)

    def density(self, omega):
        omega_arr = np.asarray(omega, dtype=float)
        if np.any(omega_arr == self.omega_mode):
            raise DivergenceError("single-mode density is a delta spike at omega_mode")
        out = np.zeros_like(omega_arr, dtype=float)
        return out if out.ndim else float(out)

    def kernel_grid(self, s):
        s = np.asarray(s, dtype=float)
        return self.g**2 * np.exp(-1j * self.omega_mode * s), 0.0

    @property
    def band_min(self):
        return self.omega_mode

    @property
    def frequency_unit(self):
        return self.omega_mode

    def level_shift(self, energy):
        if energy >= self.omega_mode:
            raise InputError("level shift defined only below the mode frequency")
        return self.g**2 / (energy - self.omega_mode)


@dataclass(frozen=True)
class LorentzianModel(SpectralModel):
    """Lorentzian density on the full line, centred at omega_center.

    J(omega) = gamma width^2 / (2 pi ((omega-omega_center)^2 + width^2)), so
    the kernel is exactly (gamma width / 2) exp(-i omega_center s - width s).
    Serves as an analytic oracle; its support is unbounded below, so it has
    no gap and hence no bound state.
    """

    gamma: float
    width: float
    omega_center: float

    variant = "lorentzian"

    def __post_init__(self):
        _require_positive("gamma", self.gamma, allow_zero=True)
        _require_positive("width", self.width)
        _require_positive("omega_center", self.omega_center)

    def density(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = self.gamma * self.width**2 / (2.0 * math.pi * ((omega - self.omega_center) ** 2 + self.width**2))
        return out if out.ndim else float(out)

    def kernel_grid(self, s):
        s = np.asarray(s, dtype=float)
        return 0.5 * self.gamma * self.width * np.exp(-(1j * self.omega_center + self.width) * s), 0.0

    @property
    def band_min(self):
        return None

    @property
    def frequency_unit(self):
        return self.omega_center


def evaluate_density(model: SpectralModel, omega) -> float | np.ndarray:
    """Spectral density J(omega); zero outside the model's support.

    Raises DivergenceError at non-integrable points (the band edge of the
    band-gap model, the delta spike of the single-mode model).
    """
    omega_arr = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega_arr)):
        raise InputError("omega must be finite")
    return model.density(omega)


def evaluate_kernel(model: SpectralModel, s: float) -> complex:
    """Memory kernel f(s) at a single nonnegative delay."""
    s = float(s)
    if not math.isfinite(s) or s < 0.0:
        raise InputError(f"delay s must be finite and >= 0, got {s!r}")
    vals, _ = model.kernel_grid(np.array([s]))
    return complex(vals[0])


def kernel_on_grid(model: SpectralModel, s: np.ndarray) -> tuple[np.ndarray, float]:
    """Kernel values on a delay grid plus the worst quadrature error estimate."""
    s = np.asarray(s, dtype=float)
    if s.size and (not np.all(np.isfinite(s)) or s.min() < 0.0):
        raise InputError("delays must be finite and >= 0")
    return model.kernel_grid(s)


def pbg_kernel_detail(model: PBGModel, s: float) -> tuple[complex, float, float]:
    """Band-gap kernel with both error diagnostics at one delay.

    Returns (value, node_doubling_error, cutoff_doubling_error).  The first
    estimate controls quadrature accuracy at the model's own kappa_max; the
    second reports how much the value moves when the wave-vector cutoff is
    doubled, i.e. the truncation sensitivity of the oscillatory tail.
    """
    value, node_err = model.kernel_detail(s)
    wide = PBGModel(eta=model.eta, omega_c=model.omega_c, kappa_max=2.0 * model.kappa_max)
    wide_value, _ = wide.kernel_detail(s)
    return value, node_err, abs(wide_value - value)


def cutoff_doubling_error(model: PBGModel, s: float) -> float:
    """Shift of the band-gap kernel when kappa_max is doubled."""
    return pbg_kernel_detail(model, s)[2]


def level_shift(model: SpectralModel, energy: float) -> float:
    """integral J(omega)/(energy - omega) d omega for energy below the band."""
    return model.level_shift(energy)


def bound_state_energy(
    model: SpectralModel,
    omega0: float,
    residual_tol: float = 1e-9,
    max_iter: int = 300,
) -> float | None:
    """Energy of the qubit-reservoir bound state below the band, if it exists.

    Solves E = omega0 + integral J(omega)/(E-omega) d omega by bisection on
    [band_min - 1e3*unit, band_min - 1e-12*unit].  Returns None when the
    fixed-point function is still nonnegative just below the band edge (no
    root in the gap).  For the Ohmic model that criterion reduces to
    omega0 - eta*cutoff >= 0.
    """
    omega0 = _require_positive("omega0", omega0)
    band = model.band_min
    if band is None:
        return None  # support unbounded below: no gap to host a bound state
    unit = model.frequency_unit

    def fixed_point(energy: float) -> float:
        return omega0 + model.level_shift(energy) - energy

    hi = band - 1e-12 * unit
    if fixed_point(hi) >= 0.0:
        return None
    lo = band - 1e3 * unit
    f_lo = fixed_point(lo)
    for _ in range(4):
        if f_lo > 0.0:
            break
        lo = band - (band - lo) * 10.0
        f_lo = fixed_point(lo)
    if f_lo <= 0.0:
        raise ConvergenceError("could not bracket the bound-state energy from below")

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = fixed_point(mid)
        if abs(f_mid) < residual_tol * unit:
            return mid
        if f_mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * unit:
            if abs(fixed_point(0.5 * (lo + hi))) < residual_tol * unit:
                return 0.5 * (lo + hi)
            break
    raise ConvergenceError(f"bound-state bisection did not converge in {max_iter} iterations")


_MODEL_CLASSES = {
    "pbg": PBGModel,
    "ohmic": OhmicModel,
    "single_mode": SingleModeModel,
    "singlemode": SingleModeModel,
    "lorentzian": LorentzianModel,
}

# Accepted spellings for config keys, per model.
_FIELD_ALIASES = {
    "pbg": {"eta": "eta", "omega_c": "omega_c", "kappa_max": "kappa_max"},
    "ohmic": {"eta": "eta", "lambda": "cutoff", "cutoff": "cutoff"},
    "single_mode": {"g": "g", "omega_mode": "omega_mode"},
    "lorentzian": {
        "gamma": "gamma",
        "lambda": "width",
        "width": "width",
        "omega_center": "omega_center",
    },
}


def from_mapping(data: dict) -> SpectralModel:
    """Build a model from a plain mapping, e.g. parsed JSON or key=value text.

    The mapping must carry a ``variant`` key; remaining keys name the model
    parameters (``Lambda`` and ``lambda`` are accepted for the Ohmic cutoff
    and the Lorentzian width, matching the usual symbols).
    """
    if "variant" not in data:
        raise InputError("model mapping needs a 'variant' key")
    variant = str(data["variant"]).lower().replace("-", "_")
    cls = _MODEL_CLASSES.get(variant)
    if cls is None:
        raise InputError(f"unknown model variant {data['variant']!r}; choose from {sorted(set(_MODEL_CLASSES))}")
    aliases = _FIELD_ALIASES[cls.variant]
    kwargs = {}
    for key, value in data.items():
        if key == "variant":
            continue
        field = aliases.get(str(key).lower())
        if field is None:
            raise InputError(f"unknown field {key!r} for {cls.variant} model")
        try:
            kwargs[field] = float(value)
        except (TypeError, ValueError) as exc:
            raise InputError(f"field {key!r} must be numeric, got {value!r}") from exc
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise InputError(f"incomplete {cls.variant} model: {exc}") from exc


def parse_model_spec(text: str) -> SpectralModel:
    """Parse compact model text such as ``ohmic:eta=0.3,Lambda=10``."""
    head, _, tail = text.partition(":")
    data: dict[str, object] = {"variant": head.strip()}
    if tail.strip():
        for item in tail.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise InputError(f"expected key=value in model spec, got {item!r}")
            data[key.strip()] = value.strip()
    return from_mapping(data)
