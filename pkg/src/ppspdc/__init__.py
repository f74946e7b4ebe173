"""Biphoton spectra from quasi-phase-matched crystals with poling imperfections.

The package simulates low-gain parametric down-conversion in periodically
poled KTP-family crystals whose poling deviates from ideal: a duty cycle away
from 0.5 and normally distributed random domain-boundary errors.  It provides
dispersion and phase-mismatch evaluation, signed domain structures and their
Fourier description, analytic and exact-integral biphoton amplitudes, seeded
Monte Carlo disorder ensembles, phase-matching solvers, pair-rate ratio
diagnostics and disorder-parameter fitting.
"""

__version__ = "0.1.0"

from .dispersion import (
    Axis,
    InvalidPairError,
    PhaseMismatchSpec,
    SELLMEIER_MODELS,
    SellmeierCoefficients,
    SellmeierModel,
    Wave,
    WavelengthRangeError,
    default_model,
    idler_wavelength,
    phase_mismatch,
    refractive_index,
    wavevector,
)
from .grating import (
    DomainStructure,
    GratingSpec,
    build_ideal,
    duty_cycle_estimate,
    fourier_coefficient,
    grating_vector,
    perturb,
    structure_from_csv,
    structure_to_csv,
)
from .amplitude import (
    BogoliubovCoefficients,
    PeakMetrics,
    ProcessConfig,
    Spectrum,
    amplitude_analytic,
    amplitude_numeric,
    bogoliubov,
    compute_spectrum,
    convolve_resolution,
    peak_metrics,
    spectral_density,
)
from .ensemble import (
    EnsembleConfig,
    EnsembleStatistics,
    child_rng,
    reduction_summary,
    run_ensemble,
    single_realization,
)
from .analysis import (
    DisorderFit,
    FitError,
    FitOptions,
    NoRootError,
    PeakRatioPrediction,
    PhaseMatchSolution,
    RateTable,
    anticorrelation,
    find_nbpm,
    find_qpm,
    fit_disorder,
    gamma_ratios,
    peak_ratio_prediction,
    rate_tables_from_csv,
)
