"""Forward simulation and inverse analysis of electrically detected spin-pair Rabi oscillation."""

__version__ = "0.1.0"

from .constants import CONSTANTS, GAMMA_PER_G, PhysConstants
from .records import Measured, SpectrumRecord, SweepRecord, TransientRecord, default_tau_grid
from .quantum import (
    DensityMatrix,
    PulseSpec,
    SpinPairParams,
    delta_from_central,
    delta_from_rho,
    propagate,
    rabi_transient_oracle,
    rotating_frame_hamiltonian,
    singlet_content,
    static_eigenbasis,
    static_hamiltonian,
    steady_state,
)
from .nutation import (
    CouplingRegime,
    LineShape,
    QuadratureSettings,
    delta_analytic,
    kappa,
    nutation_curve,
    oracle_ensemble_average,
    rabi_frequency,
)
from .synth import (
    OscComponent,
    accumulate,
    snr_per_pair,
    synthesize_sweep,
    synthesize_transient,
)
from .fitting import (
    FitResult,
    LorentzianPeak,
    detect_envelope_maxima,
    fit_exp_decay,
    fit_lorentzians,
    solve_damped_lsq,
)
from .spectral import (
    RabiComponentTable,
    decay_width_consistency,
    detuning_to_field,
    extract_components,
    fft_magnitude,
    kappa_ratio,
    larmor_detuning,
)
from .gfactor import AngleSeries, axial_g, fit_anisotropy, g_factor
