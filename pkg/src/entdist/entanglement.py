"""Entanglement bookkeeping for two decaying qubit-reservoir pairs.

Each reservoir is collapsed onto the collective one-photon state, so the
joint system is an effective four-qubit pure state.  Closed-form expressions
give the concurrence precursor Q of every bipartite partition directly from
the single-pair amplitude b(t); the general spin-flip concurrence applied to
partial traces of the effective state serves as the independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import AmplitudeTrajectory
from .errors import InputError

__all__ = [
    "InitialState",
    "PartitionQSet",
    "ConcurrenceSet",
    "EventReport",
    "PARTITIONS",
    "qq_density_matrix",
    "effective_global_state",
    "partition_q",
    "partition_q_series",
    "concurrence_series",
    "identity_residual",
    "identity_residual_series",
    "wootters_concurrence",
    "partial_trace",
    "global_split_concurrence",
    "detect_events",
]

PARTITIONS = ("q1q2", "r1r2", "q1r1", "q1r2")

# Axis positions of (q1, r1, q2, r2) in the effective four-qubit state.
_PARTITION_AXES = {
    "q1q2": (0, 2),
    "r1r2": (1, 3),
    "q1r1": (0, 1),
    "q1r2": (0, 3),
    "q2r1": (2, 1),
    "q2r2": (2, 3),
}


@dataclass(frozen=True)
class InitialState:
    """Initial two-qubit state alpha |--> + beta |++> (reservoirs in vacuum)."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        if not (math.isfinite(a.real) and math.isfinite(a.imag) and math.isfinite(b.real) and math.isfinite(b.imag)):
            raise InputError("alpha and beta must be finite")
        norm = abs(a) ** 2 + abs(b) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise InputError(f"|alpha|^2 + |beta|^2 must be 1, got {norm!r}")

    @classmethod
    def from_alpha(cls, alpha: float) -> "InitialState":
        """Real-coefficient state with beta = sqrt(1 - alpha^2)."""
        if not 0.0 < alpha < 1.0:
            raise InputError(f"alpha must lie in (0, 1), got {alpha}")
        return cls(alpha, math.sqrt(1.0 - alpha**2))

    @property
    def initial_concurrence(self) -> float:
        return 2.0 * abs(self.alpha) * abs(self.beta)


@dataclass(frozen=True)
class PartitionQSet:
    """Concurrence precursors Q for the four independent partitions at one time."""

    q_q1q2: float
    q_r1r2: float
    q_q1r1: float
    q_q1r2: float
    time_index: int | None = None

    def as_dict(self) -> dict[str, float]:
        return {
            "q1q2": self.q_q1q2,
            "r1r2": self.q_r1r2,
            "q1r1": self.q_q1r1,
            "q1r2": self.q_q1r2,
        }


@dataclass(frozen=True)
class ConcurrenceSet:
    """Clamped concurrences C = max(0, Q) for the four partitions."""

    c_q1q2: float
    c_r1r2: float
    c_q1r1: float
    c_q1r2: float
    time_index: int | None = None

    @classmethod
    def from_q(cls, qset: PartitionQSet) -> "ConcurrenceSet":
        return cls(
            *(max(0.0, q) for q in (qset.q_q1q2, qset.q_r1r2, qset.q_q1r1, qset.q_q1r2)),
            time_index=qset.time_index,
        )


def _check_amplitude(b: complex) -> complex:
    b = complex(b)
    if not (math.isfinite(b.real) and math.isfinite(b.imag)):
        raise InputError("amplitude b must be finite")
    if abs(b) ** 2 > 1.0 + 1e-9:
        raise InputError(f"|b| must not exceed 1, got |b|^2 = {abs(b) ** 2!r}")
    return b


def _p_value(state: InitialState, abs_b2: np.ndarray, bt2: np.ndarray) -> np.ndarray:
    return abs(state.beta) ** 2 * abs_b2 * bt2


def qq_density_matrix(state: InitialState, b: complex) -> np.ndarray:
    """Reduced density matrix of the two qubits in the basis (++, +-, -+, --).

    X-form: populations |beta b^2|^2, p, p, x on the diagonal and coherence
    beta alpha* b^2 in the corners, with p = |beta b|^2 (1-|b|^2) and
    x = 1 - |beta|^2 |b|^4 - 2p.
    """
    b = _check_amplitude(b)
    abs_b2 = min(abs(b) ** 2, 1.0)
    bt2 = 1.0 - abs_b2
    p = abs(state.beta) ** 2 * abs_b2 * bt2
    x = 1.0 - abs(state.beta) ** 2 * abs_b2**2 - 2.0 * p
    coherence = state.beta * np.conj(state.alpha) * b**2
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = abs(state.beta) ** 2 * abs_b2**2
    rho[1, 1] = p
    rho[2, 2] = p
    rho[3, 3] = x
    rho[0, 3] = coherence
    rho[3, 0] = np.conj(coherence)
    return rho


def effective_global_state(state: InitialState, b: complex) -> np.ndarray:
    """Effective four-qubit pure state in the product basis (q1, r1, q2, r2).

    Qubit index 0 means excited (+), 1 means ground (-); reservoir index 0 is
    the vacuum, 1 the normalised collective one-photon state.  Returned as a
    unit-norm vector of 16 complex components.
    """
    b = _check_amplitude(b)
    bt = math.sqrt(max(0.0, 1.0 - abs(b) ** 2))
    pair = np.zeros((2, 2), dtype=complex)
    pair[0, 0] = b  # |+, vacuum>
    pair[1, 1] = bt  # |-, collective photon>
    ground = np.zeros((2, 2), dtype=complex)
    ground[1, 0] = 1.0  # |-, vacuum>
    psi = state.alpha * np.einsum("ab,cd->abcd", ground, ground) + state.beta * np.einsum(
        "ab,cd->abcd", pair, pair
    )
    psi = psi.reshape(16)
    return psi / np.linalg.norm(psi)


def partial_trace(psi: np.ndarray, partition: str) -> np.ndarray:
    """4x4 reduced density matrix of one pair of effective qubits.

    ``partition`` names the kept pair, e.g. "q1q2" or "q2r1"; the remaining
    two qubits are traced out.
    """
    axes = _PARTITION_AXES.get(partition)
    if axes is None:
        raise InputError(f"unknown partition {partition!r}; choose from {sorted(_PARTITION_AXES)}")
    psi4 = np.asarray(psi, dtype=complex).reshape(2, 2, 2, 2)
    rest = tuple(i for i in range(4) if i not in axes)
    mat = np.transpose(psi4, axes + rest).reshape(4, 4)
    return mat @ mat.conj().T


def partition_q(state: InitialState, b: complex, time_index: int | None = None) -> PartitionQSet:
    """Closed-form Q values of all four independent partitions at amplitude b."""
    b = _check_amplitude(b)
    q = partition_q_series(state, np.array([b]))
    return PartitionQSet(
        q_q1q2=float(q["q1q2"][0]),
        q_r1r2=float(q["r1r2"][0]),
        q_q1r1=float(q["q1r1"][0]),
        q_q1r2=float(q["q1r2"][0]),
        time_index=time_index,
    )


def partition_q_series(state: InitialState, b: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorised Q values over an array of amplitudes."""
    b = np.asarray(b, dtype=complex)
    abs_b = np.abs(b)
    abs_b2 = np.minimum(abs_b**2, 1.0)
    bt2 = 1.0 - abs_b2
    bt = np.sqrt(bt2)
    ab = abs(state.alpha) * abs(state.beta)
    b2 = abs(state.beta) ** 2
    p = b2 * abs_b2 * bt2
    return {
        "q1q2": 2.0 * ab * abs_b2 - 2.0 * p,
        "r1r2": 2.0 * ab * bt2 - 2.0 * p,
        "q1r1": 2.0 * b2 * abs_b * bt,
        "q1r2": 2.0 * ab * abs_b * bt - 2.0 * p,
    }


def concurrence_series(state: InitialState, traj: AmplitudeTrajectory) -> dict[str, np.ndarray]:
    """Per-partition concurrences C = max(0, Q) along a trajectory."""
    q = partition_q_series(state, traj.b)
    return {name: np.maximum(0.0, vals) for name, vals in q.items()}


def identity_residual(state: InitialState, qset: PartitionQSet) -> float:
    """Residual of the entanglement-distribution identity.

    Q_q1q2 + Q_r1r2 + 2|alpha/beta| Q_q1r1 - 2 Q_q1r2 - 2|alpha beta|; zero to
    rounding for every valid amplitude.  Undefined when alpha or beta vanish
    (the |alpha/beta| weight degenerates).
    """
    if abs(state.beta) < 1e-15 or abs(state.alpha) < 1e-15:
        raise InputError("identity residual needs both alpha and beta nonzero")
    ratio = abs(state.alpha) / abs(state.beta)
    return (
        qset.q_q1q2
        + qset.q_r1r2
        + 2.0 * ratio * qset.q_q1r1
        - 2.0 * qset.q_q1r2
        - state.initial_concurrence
    )


def identity_residual_series(state: InitialState, traj: AmplitudeTrajectory) -> np.ndarray:
    """Identity residual at every grid point of a trajectory."""
    if abs(state.beta) < 1e-15 or abs(state.alpha) < 1e-15:
        raise InputError("identity residual needs both alpha and beta nonzero")
    q = partition_q_series(state, traj.b)
    ratio = abs(state.alpha) / abs(state.beta)
    return (
        q["q1q2"] + q["r1r2"] + 2.0 * ratio * q["q1r1"] - 2.0 * q["q1r2"] - state.initial_concurrence
    )


_SY_SY = np.array(
    [
        [0, 0, 0, -1],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [-1, 0, 0, 0],
    ],
    dtype=complex,
)


def wootters_concurrence(rho: np.ndarray, psd_tol: float = 1e-9) -> float:
    """Spin-flip concurrence of a two-qubit density matrix.

    max(0, l1 - l2 - l3 - l4) with l_i the decreasing square roots of the
    eigenvalues of rho (sy x sy) rho* (sy x sy).
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise InputError("density matrix must be 4x4")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-8:
        raise InputError("density matrix must be Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-8:
        raise InputError("density matrix must have unit trace")
    if np.linalg.eigvalsh(rho).min() < -psd_tol:
        raise InputError("density matrix must be positive semidefinite")
    return float(_wootters_batch(rho[None, :, :])[0])


def _wootters_batch(rhos: np.ndarray) -> np.ndarray:
    flipped = _SY_SY @ rhos.conj() @ _SY_SY
    lam = np.linalg.eigvals(rhos @ flipped)
    lam = np.sqrt(np.clip(lam.real, 0.0, None))
    lam = np.sort(lam, axis=-1)[:, ::-1]
    return np.maximum(0.0, lam[:, 0] - lam[:, 1] - lam[:, 2] - lam[:, 3])


def global_split_concurrence(psi: np.ndarray) -> float:
    """Generalised concurrence of the (q1 r1):(q2 r2) split of a pure state.

    sqrt(2 (1 - Tr rho_A^2)) with rho_A the reduced state of the first pair;
    conserved at 2|alpha beta| because the two pairs never interact.
    """
    mat = np.asarray(psi, dtype=complex).reshape(4, 4)
    s = np.linalg.svd(mat, compute_uv=False)
    purity = float(np.sum(s**4))
    return math.sqrt(max(0.0, 2.0 * (1.0 - purity)))


@dataclass(frozen=True)
class ChannelSummary:
    """Per-partition event bookkeeping over one trajectory."""

    plateau: float
    plateau_std: float
    always_zero: bool
    revival: bool


@dataclass
class EventReport:
    """Detected entanglement events and the regime classification."""

    regime: str
    esd_intervals: list[tuple[float, float]]
    esb_onsets: list[float]
    channels: dict[str, ChannelSummary]
    eq_threshold: dict[str, float | bool]
    initial_concurrence: float
    transfer_complete: bool
    thresholds: dict[str, float] = field(default_factory=dict)

    @property
    def esd_detected(self) -> bool:
        return bool(self.esd_intervals)

    @property
    def esb_detected(self) -> bool:
        return bool(self.esb_onsets)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "esd_intervals": [list(iv) for iv in self.esd_intervals],
            "esb_onsets": list(self.esb_onsets),
            "esd_detected": self.esd_detected,
            "esb_detected": self.esb_detected,
            "transfer_complete": self.transfer_complete,
            "initial_concurrence": self.initial_concurrence,
            "channels": {
                name: {
                    "plateau": ch.plateau,
                    "plateau_std": ch.plateau_std,
                    "always_zero": ch.always_zero,
                    "revival": ch.revival,
                }
                for name, ch in self.channels.items()
            },
            "separation_threshold": self.eq_threshold,
            "thresholds": self.thresholds,
        }


def _runs(mask: np.ndarray) -> list[tuple[int, int, bool]]:
    """Maximal constant runs of a boolean array as (start, stop, value), stop exclusive."""
    out = []
    start = 0
    for i in range(1, len(mask) + 1):
        if i == len(mask) or mask[i] != mask[start]:
            out.append((start, i, bool(mask[start])))
            start = i
    return out


def detect_events(
    state: InitialState,
    traj: AmplitudeTrajectory,
    zero_tol: float = 1e-9,
    min_run: int = 3,
    min_birth_delay: float | None = None,
    plateau_fraction: float = 0.1,
    plateau_tol: float = 1e-3,
) -> EventReport:
    """Scan the concurrence of every partition for death/birth events.

    A channel counts as dead where C < ``zero_tol``; runs shorter than
    ``min_run`` grid points are treated as discretisation chatter.  A birth
    of the reservoir-pair channel is "sudden" only when the preceding dead
    stretch spans at least ``min_birth_delay`` (default max(3 dt, 0.1% of
    t_max)), which filters channels that grow continuously out of t = 0 (the
    delayed-birth weight |alpha|/|beta| >= 1 case) without masking real
    delays.

    Regime rules, in order: any sudden death names the regime (esd-and-esb
    or esd-no-esb).  A sudden birth alone is esb-no-esd unless the
    reservoir-pair channel settles to a live plateau while at least three
    partitions hold plateaus above ``plateau_tol`` - a one-time birth into a
    stable configuration is stable-distribution, not an esb transient.
    Without any event the run is stable-distribution under the same
    three-plateau criterion and full-transfer otherwise.
    """
    times = traj.times
    if min_birth_delay is None:
        min_birth_delay = max(3.0 * traj.grid.dt, 0.001 * traj.grid.t_max)
    series = concurrence_series(state, traj)

    n_tail = max(2, int(round(plateau_fraction * len(times))))
    channels: dict[str, ChannelSummary] = {}
    runs_by_channel: dict[str, list[tuple[int, int, bool]]] = {}
    for name in PARTITIONS:
        c = series[name]
        alive = c > zero_tol
        runs = _runs(alive)
        runs_by_channel[name] = runs
        alive_runs = [r for r in runs if r[2] and r[1] - r[0] >= min_run]
        dead_runs = [r for r in runs if not r[2] and r[1] - r[0] >= min_run]
        revival = False
        if alive_runs and dead_runs:
            first_alive_end = alive_runs[0][1]
            # died after being alive, then came back
            revival = any(
                d[0] >= first_alive_end and any(a[0] >= d[1] for a in alive_runs) for d in dead_runs
            )
        channels[name] = ChannelSummary(
            plateau=float(c[-n_tail:].mean()),
            plateau_std=float(c[-n_tail:].std()),
            always_zero=bool(np.all(~alive)),
            revival=revival,
        )

    # Sudden death of the qubit pair: qualifying dead runs after a qualifying
    # alive run.
    esd_intervals: list[tuple[float, float]] = []
    qq_runs = runs_by_channel["q1q2"]
    seen_alive = False
    for start, stop, value in qq_runs:
        if value:
            if stop - start >= min_run:
                seen_alive = True
            continue
        if seen_alive and stop - start >= min_run:
            esd_intervals.append((float(times[start]), float(times[stop - 1])))

    # Sudden birth of the reservoir pair: alive runs preceded by a qualifying
    # dead stretch.
    esb_onsets: list[float] = []
    rr_runs = runs_by_channel["r1r2"]
    for idx, (start, stop, value) in enumerate(rr_runs):
        if not value or stop - start < min_run or idx == 0:
            continue
        prev_start, prev_stop, prev_value = rr_runs[idx - 1]
        if prev_value or prev_stop - prev_start < min_run:
            continue
        if times[prev_stop - 1] - times[prev_start] >= min_birth_delay:
            esb_onsets.append(float(times[start]))

    population = traj.population
    ratio = abs(state.alpha) / math.sqrt(max(1e-300, 1.0 - abs(state.alpha) ** 2))
    eq_threshold = {
        "ratio": float(ratio),
        "min_population": float(population.min()),
        "max_transfer": float((1.0 - population).max()),
        "esd_possible": bool((1.0 - population).max() > ratio),
        "esb_possible": bool(population.min() < ratio),
        # a birth can be sudden only if the channel starts out dead
        "esb_delayed_possible": bool(population.min() < ratio < 1.0),
    }

    plateaus = {name: channels[name].plateau for name in PARTITIONS}
    n_plateau = sum(1 for v in plateaus.values() if v > plateau_tol)
    transfer_complete = bool(
        plateaus["r1r2"] >= 0.98 * state.initial_concurrence
        and all(plateaus[name] < plateau_tol for name in PARTITIONS if name != "r1r2")
    )

    esd = bool(esd_intervals)
    esb = bool(esb_onsets)
    settled_birth = plateaus["r1r2"] > plateau_tol and n_plateau >= 3
    if esd and esb:
        regime = "esd-and-esb"
    elif esd:
        regime = "esd-no-esb"
    elif esb and not settled_birth:
        regime = "esb-no-esd"
    elif n_plateau >= 3:
        regime = "stable-distribution"
    else:
        regime = "full-transfer"

    return EventReport(
        regime=regime,
        esd_intervals=esd_intervals,
        esb_onsets=esb_onsets,
        channels=channels,
        eq_threshold=eq_threshold,
        initial_concurrence=state.initial_concurrence,
        transfer_complete=transfer_complete,
        thresholds={
            "zero_tol": zero_tol,
            "min_run": min_run,
            "min_birth_delay": min_birth_delay,
            "plateau_fraction": plateau_fraction,
            "plateau_tol": plateau_tol,
        },
    )
