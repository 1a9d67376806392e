"""Quantum ratchet simulation toolkit.

Builds one-period Floquet propagators for ac-driven periodic Hamiltonians
on a ring, extracts quasienergy spectra and transporting Floquet states,
computes asymptotic directed currents and their resonances, and
cross-validates against the classical limit and an analytic two-level
avoided-crossing model.
"""

__version__ = "0.1.0"

from .model import (
    DrivingField,
    FlashingPotential,
    RatchetSystem,
    Variant,
    WaveState,
    field_value,
    vector_potential,
    vector_potential_integral,
    potential_value,
    check_shift_symmetry,
    check_time_reversal,
    check_flashing_symmetries,
    tilting_system,
    flashing_system,
)
from .propagator import (
    PropagatorConfig,
    Scheme,
    FloquetMatrix,
    KickSplitTables,
    UnitarityViolation,
    StepSizeUnderflow,
    build_floquet_matrix,
    build_window_propagator,
    step_kick_split,
    step_interaction_picture,
    save_floquet_matrix,
    load_floquet_matrix,
    default_n_cut,
)
from .floquet import (
    FloquetDecomposition,
    BandTrack,
    AvoidedCrossing,
    DegenerateSubspaceAmbiguity,
    TrackingAmbiguity,
    decompose,
    check_timereversal_property,
    check_shift_property,
    cumulative_momentum,
    track_bands,
    find_avoided_crossings,
)
from .observables import (
    InitialState,
    HusimiGrid,
    NormDeficit,
    plane_wave_zero,
    asymptotic_current_floquet,
    averaged_current,
    evolve_running_average,
    husimi,
)
from .twolevel import TwoLevelModel, ZeroCoupling, eigenstates, momenta, splitting_scaling
from . import classical

__all__ = [name for name in dir() if not name.startswith("_")]
