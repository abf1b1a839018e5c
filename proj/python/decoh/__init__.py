"""Gaussian entropy generation in open quantum systems.

Exact and master-equation evolutions of a central oscillator in a bath,
thermal one-loop self-masses and stationary spectra for an interacting
scalar field, Kadanoff-Baym memory integration, and decoherence-rate
fitting.  Validation problems raise ValueError, numerical failures
RuntimeError.
"""

from ._core import (
    KbResult,
    MasterCoefficients,
    MemoryKernels,
    OscillatorModel,
    QftParams,
    RateFit,
    SelfMassSpectrum,
    StationarySolution,
    __version__,
    build_model,
    decay_rate_formula,
    entropy_of_delta,
    evolve_kb,
    extract_rate,
    free_thermal_area,
    im_retarded_selfmass,
    im_selfmass_closed,
    master_coefficients,
    perturbativity_warning,
    phase_space_area,
    qm_exact_series,
    qm_master_series,
    re_retarded_selfmass,
    read_series,
    reproduce,
    run,
    solve_stationary,
    tabulate_selfmass,
)

__all__ = [
    "KbResult",
    "MasterCoefficients",
    "MemoryKernels",
    "OscillatorModel",
    "QftParams",
    "RateFit",
    "SelfMassSpectrum",
    "StationarySolution",
    "__version__",
    "build_model",
    "decay_rate_formula",
    "entropy_of_delta",
    "evolve_kb",
    "extract_rate",
    "free_thermal_area",
    "im_retarded_selfmass",
    "im_selfmass_closed",
    "master_coefficients",
    "perturbativity_warning",
    "phase_space_area",
    "qm_exact_series",
    "qm_master_series",
    "re_retarded_selfmass",
    "read_series",
    "reproduce",
    "run",
    "solve_stationary",
    "tabulate_selfmass",
]
