"""effham: effective low-energy Hamiltonians from path-integral amplitudes.

Builds the transition matrix of a coupled anharmonic-oscillator chain
over a stochastically selected basis, extracts its excitation spectrum,
and derives thermodynamic observables, with standard Lagrangian lattice
estimators and dense-grid diagonalization available as cross-checks.
"""

from .basis import Basis, BasisNode, build_regular_basis, build_stochastic_basis, \
    estimate_density
from .errors import ConfigurationError, EffhamError, NumericalError, OverlapError, \
    SamplingError
from .freekernel import FreeKernelParams, free_matrix_element, free_propagator, \
    gaussian_endpoint_sigma, kg_free_energy, kg_normal_modes, kg_thermo
from .hamiltonian import EffectiveSpectrum, TransitionMatrix, assemble, diagonalize, \
    matrix_element, propagate_errors, spectrum_with_errors
from .model import FieldPath, LatticeParams, ModelParams, action_at_derivatives, \
    split_action, total_action
from .sampler import EndpointEnsemble, LatticeEnsemble, MetropolisConfig, RngStream, \
    estimate_sv_factor, sample_brownian_bridge, sample_endpoint_ensemble, \
    sample_periodic_lattice
from .stats import EnsembleStats, integrated_autocorr_time, jackknife, series_stats
from .thermo import ThermoPoint, consistency_checks, pressure_finite_difference, \
    thermo_from_levels, thermo_from_spectrum

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
