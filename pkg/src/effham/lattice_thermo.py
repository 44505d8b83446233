"""Lagrangian lattice estimators for U, C, F and S.

These are the standard thermal-trace estimators on time-periodic
ensembles, one independent simulation per beta:

    U = N_s / (2 a_t) + <dS/da_t> / N_t

    C = -kb beta^2 [ -N_s / (2 N_t a_t^2)
          + ( <d2S/da_t^2> - Var(dS/da_t) ) / N_t^2 ]

    F = F_KG - log < exp(-(lambda/2) a_t sum phi^4) >_KG / beta

F reweights a lambda = 0 (harmonic-chain) ensemble against the analytic
normal-mode free energy, so at lambda = 0 it is exact with zero error.
Per-observable temporal spacings follow the stability pattern of the
estimators: a_t = 1/30 for U, 0.01 for F (the analytic F_KG is a
continuum expression) and 0.1 for C, which fluctuates wildly below that.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, OverlapError
from .freekernel import kg_free_energy, kg_normal_modes
from .model import LatticeParams, ModelParams, at_derivatives_batch
from .sampler import LatticeEnsemble, MetropolisConfig, RngStream, \
    sample_periodic_lattice
from .stats import jackknife, series_stats
from .thermo import ThermoPoint

log = logging.getLogger(__name__)

A_T_ENERGY = 1.0 / 30.0
A_T_FREE_ENERGY = 0.01
A_T_SPECIFIC_HEAT = 0.1
_LOGMEAN_UNDERFLOW = -700.0


@dataclass
class LatticeThermoConfig:
    """Per-beta simulation settings for the Lagrangian estimators."""

    beta: float
    n_configs: int
    a_t_energy: float = A_T_ENERGY
    a_t_free_energy: float = A_T_FREE_ENERGY
    a_t_specific_heat: float = A_T_SPECIFIC_HEAT


def thermal_lattice_params(beta: float, a_t: float, n_sites: int, a_s: float = 1.0,
                           hbar: float = 1.0) -> LatticeParams:
    """Lattice geometry realizing inverse temperature beta = N_t a_t / hbar."""
    n_time = round(beta * hbar / a_t)
    if n_time < 2 or abs(n_time * a_t - beta * hbar) > 1e-9 * beta * hbar:
        raise ConfigurationError(
            f"beta*hbar = {beta * hbar} is not an integer multiple >= 2 of a_t = {a_t}")
    return LatticeParams(n_sites=n_sites, n_time=n_time, a_t=a_t, a_s=a_s)


def _check_match(ensemble: LatticeEnsemble, mp: ModelParams, lp: LatticeParams):
    if ensemble.lp != lp:
        raise ConfigurationError("ensemble lattice parameters do not match")
    if ensemble.configs.shape[1:] != (lp.n_time, lp.n_sites):
        raise ConfigurationError("ensemble shape does not match lattice")


def average_energy_lattice(ensemble: LatticeEnsemble, mp: ModelParams,
                           lp: LatticeParams):
    """(U, error): action-derivative estimator with autocorrelation-corrected error."""
    _check_match(ensemble, mp, lp)
    d1, _ = at_derivatives_batch(ensemble.configs, mp, lp)
    stats = series_stats(d1 / lp.n_time)
    u = lp.n_sites / (2.0 * lp.a_t) + stats.mean
    return float(u), stats.std_error


def specific_heat_lattice(ensemble: LatticeEnsemble, mp: ModelParams,
                          lp: LatticeParams, n_blocks: int = 20):
    """(C, error): second-derivative estimator with jackknife error.

    The estimator involves a large cancellation between <d2S/da^2> and
    Var(dS/da); below a_t = 0.1 its variance grows quickly, hence the
    warning."""
    _check_match(ensemble, mp, lp)
    if lp.a_t < 0.1:
        warnings.warn(
            f"specific-heat estimator is unstable for a_t = {lp.a_t} < 0.1; "
            "expect large fluctuations", stacklevel=2)
    d1, d2 = at_derivatives_batch(ensemble.configs, mp, lp)
    beta = lp.total_time / mp.hbar
    pref = mp.kb * beta**2

    def estimator(cols):
        m1 = cols[:, 0].mean()
        var = (cols[:, 0] ** 2).mean() - m1**2
        return -pref * (-lp.n_sites / (2.0 * lp.n_time * lp.a_t**2)
                        + (cols[:, 1].mean() - var) / lp.n_time**2)

    c, err = jackknife(np.column_stack([d1, d2]), estimator, n_blocks)
    return float(c), float(err)


def phi4_reweight_exponent(ensemble: LatticeEnsemble, lam: float,
                           lp: LatticeParams):
    """W = (lambda/2) a_t sum_{n,k} phi^4 per configuration."""
    return 0.5 * lam * lp.a_t * (ensemble.configs**4).sum(axis=(1, 2))


def free_energy_lattice(beta: float, mp: ModelParams, lp: LatticeParams,
                        ensemble_kg: LatticeEnsemble, n_blocks: int = 20):
    """(F, error) by reweighting a harmonic-chain ensemble.

    ensemble_kg must be sampled at lambda = 0; the quartic coupling of mp
    enters only through the reweighting observable."""
    _check_match(ensemble_kg, mp, lp)
    if ensemble_kg.mp.lam != 0.0:
        raise ConfigurationError(
            "free_energy_lattice needs an ensemble sampled at lambda = 0, "
            f"got lambda = {ensemble_kg.mp.lam}")
    modes = kg_normal_modes(lp.n_sites, mp.omega, mp.omega0, mp.boundary)
    f_kg = kg_free_energy(beta, modes, mp.hbar)
    if mp.lam == 0.0:
        return float(f_kg), 0.0
    w = phi4_reweight_exponent(ensemble_kg, mp.lam, lp)

    def estimator(wi):
        return (logsumexp(-wi) - np.log(wi.size)) / beta

    log_mean_over_beta, err = jackknife(w, estimator, n_blocks)
    if log_mean_over_beta * beta < _LOGMEAN_UNDERFLOW:
        raise OverlapError(
            "reweighting factor underflowed (overlap catastrophe): the "
            f"single-stage bound is F >= {f_kg - log_mean_over_beta:.6g}; "
            "use staged reweighting over intermediate couplings")
    return float(f_kg - log_mean_over_beta), float(err)


def entropy_lattice(u_point, f_point, beta: float, kb: float = 1.0):
    """(S, error) = kb beta (U - F) with errors combined in quadrature."""
    u, u_err = u_point
    f, f_err = f_point
    return kb * beta * (u - f), kb * beta * float(np.hypot(u_err, f_err))


def measure_beta_point(mp: ModelParams, n_sites: int, cfg: LatticeThermoConfig,
                       met: MetropolisConfig, rng: RngStream,
                       a_s: float = 1.0) -> ThermoPoint:
    """One full Lagrangian row: fresh ensembles per observable at its a_t."""
    beta = cfg.beta
    lp_u = thermal_lattice_params(beta, cfg.a_t_energy, n_sites, a_s, mp.hbar)
    ens_u = sample_periodic_lattice(cfg.n_configs, lp_u, mp, rng.child(0), met)
    u, u_err = average_energy_lattice(ens_u, mp, lp_u)

    lp_c = thermal_lattice_params(beta, cfg.a_t_specific_heat, n_sites, a_s, mp.hbar)
    ens_c = sample_periodic_lattice(cfg.n_configs, lp_c, mp, rng.child(1), met)
    c, c_err = specific_heat_lattice(ens_c, mp, lp_c)

    lp_f = thermal_lattice_params(beta, cfg.a_t_free_energy, n_sites, a_s, mp.hbar)
    if mp.lam == 0.0:
        modes = kg_normal_modes(n_sites, mp.omega, mp.omega0, mp.boundary)
        f, f_err = float(kg_free_energy(beta, modes, mp.hbar)), 0.0
    else:
        mp_kg = ModelParams(omega=mp.omega, omega0=mp.omega0, lam=0.0,
                            mass=mp.mass, hbar=mp.hbar, kb=mp.kb,
                            boundary=mp.boundary)
        ens_f = sample_periodic_lattice(cfg.n_configs, lp_f, mp_kg,
                                        rng.child(2), met)
        f, f_err = free_energy_lattice(beta, mp, lp_f, ens_f)

    s, s_err = entropy_lattice((u, u_err), (f, f_err), beta, mp.kb)
    log.info("lagrangian beta=%.4g: F=%.6g(%.2g) U=%.6g(%.2g) S=%.6g(%.2g) "
             "C=%.6g(%.2g)", beta, f, f_err, u, u_err, s, s_err, c, c_err)
    return ThermoPoint(beta=beta, z=np.nan, log_z=np.nan, f=f, f_err=f_err,
                       u=u, u_err=u_err, s=s, s_err=s_err, c=c, c_err=c_err,
                       source="lagrangian")
