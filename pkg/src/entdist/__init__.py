"""Entanglement distribution of two qubits in independent amplitude-damping reservoirs.

The package solves the exact non-Markovian decay amplitude of each qubit
from its reservoir's memory kernel, tracks the concurrence of every
bipartite partition of the effective four-qubit system, checks the
weighted-sum conservation identity the partitions obey, and classifies
sudden-death/sudden-birth regimes.
"""

__version__ = "0.1.0"

from .dynamics import (
    AmplitudeTrajectory,
    MasterCoefficients,
    PlateauEstimate,
    TimeGrid,
    master_coefficients,
    plateau,
    solve_amplitude,
    solve_with_kernel,
)
from .entanglement import (
    PARTITIONS,
    ConcurrenceSet,
    EventReport,
    InitialState,
    PartitionQSet,
    concurrence_series,
    detect_events,
    effective_global_state,
    global_split_concurrence,
    identity_residual,
    identity_residual_series,
    partial_trace,
    partition_q,
    partition_q_series,
    qq_density_matrix,
    wootters_concurrence,
)
from .errors import (
    AccuracyError,
    ConfigError,
    ConvergenceError,
    DivergenceError,
    EntdistError,
    InputError,
    InstabilityError,
)
from .oracle import DiscretizedBath, band_limited_kernel, discretized_reference, norm_check, oracle_comparison
from .spectral import (
    LorentzianModel,
    OhmicModel,
    PBGModel,
    SingleModeModel,
    SpectralModel,
    bound_state_energy,
    cutoff_doubling_error,
    evaluate_density,
    evaluate_kernel,
    from_mapping,
    kernel_on_grid,
    level_shift,
    parse_model_spec,
    pbg_kernel_detail,
)

__all__ = [name for name in dir() if not name.startswith("_")]
