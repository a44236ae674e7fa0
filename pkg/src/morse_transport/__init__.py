"""Optimal transport of a quantum wavepacket in a moving shallow Morse trap.

The library computes the spectral data of a single-bound-state Morse trap,
the memory kernel and leakage spectrum of its non-adiabatic coupling, a
damped-oscillator fit with an exact rational Laplace transform, the
Euler-Lagrange-optimal trap velocity under a fluence constraint, and the
resulting bound-state survival probability by independent formulations,
including phonon-dressed variants and a discretized dynamics oracle.
"""

from . import errors
from .config import RunConfig, load_config
from .fitting import DampedOscFit, RationalLaplace, damped_osc, fit_kernel, laplace_of_fit
from .kernel import (
    KernelSamples,
    LeakageSpectrum,
    kernel_on_grid,
    leakage_spectrum_value,
    memory_kernel,
    sample_kernel,
    spectrum_on_grid,
    windowed_fourier,
)
from .morse import (
    MatrixElement,
    MorseModel,
    a_coefficient,
    bound_eigenfunction,
    build_model,
    continuum_eigenfunction,
    continuum_frequency,
    dipole_moment_closed,
    dipole_moment_quadrature,
    gap_frequency,
    matrix_element,
)
from .numerics import (
    Polynomial,
    find_roots,
    fit_least_squares,
    integrate_adaptive,
    kummer_m,
    log_gamma,
    tricomi_u,
)
from .optimizer import (
    PoleClassification,
    Trajectory,
    acceleration,
    characteristic_polynomial,
    classify_poles,
    el_residual,
    fluence,
    fluence_matched_horizon,
    lagrange_selfcheck,
    lambda_sweep,
    position,
    solve_trajectory,
    velocity,
)
from .survival import (
    AdiabaticityReport,
    OracleResult,
    PhononMode,
    SurvivalSeries,
    adiabaticity_report,
    cross_term,
    load_mode_table,
    phonon_coupling,
    simulate_discretized_free,
    survival_free_spectral,
    survival_free_time,
    survival_one_phonon,
    survival_series,
    survival_superposition,
    velocity_spectrum,
)

__version__ = "0.1.0"
