"""Thermo-optical multistability of cryogenic silica microcavities and TLS mechanical loss."""

__version__ = "0.1.0"

from .core import (
    CavityParams,
    MaterialData,
    ResonanceModel,
    eval_resonance,
    half_linewidth,
    inversion_temperature,
    mu_parameter,
    normalized_shift,
    reference_model,
    refractive_contribution,
)
from .dynamics import (
    FieldState,
    SweepConfig,
    ThermalKernel,
    derivative,
    integrate_sweep,
    linear_stability,
    transmission,
)
from .errors import (
    CryoCavityError,
    Degenerate,
    GridTooCoarse,
    IllConditioned,
    InsufficientData,
    NoInversion,
    NumericalFailure,
    OutOfTable,
    StiffnessFailure,
)
from .fitting import CalibrationSeries, extract_chi_stat, fit_resonance
from .steady import (
    BranchPoint,
    BranchSet,
    Regime,
    branch_curve,
    classify_regime,
    classify_stability,
    hysteresis_trace,
    regime_map,
    steady_states,
    turning_points,
)
from .tls import (
    MechMode,
    TlsModel,
    brownian_rms,
    displacement_spectrum,
    frequency_shift,
    phonon_occupancy,
    q_inverse_activated,
    q_inverse_tunneling,
    q_total,
    reference_tls,
    saturation_displacement,
)
