"""Shared brute-force oracles for the test suite.

Everything here is independent of the code paths under test: dense
multivariate-Gaussian linear algebra for the quadratic-action ensembles
and exact mode sums for the harmonic lattice.
"""

import numpy as np


def bridge_precision(n_time, a_t, mass=1.0, hbar=1.0):
    """Precision matrix of the interior slices of a free fixed-endpoint chain."""
    n_int = n_time - 1
    t = 2.0 * np.eye(n_int) - np.eye(n_int, k=1) - np.eye(n_int, k=-1)
    return (mass / (hbar * a_t)) * t


def bridge_covariance(n_time, a_t, mass=1.0, hbar=1.0):
    return np.linalg.inv(bridge_precision(n_time, a_t, mass, hbar))


def pinned_chain_covariance(n_time, a_t, omega=0.0, mass=1.0, hbar=1.0):
    """Covariance of slices 1..N_t of a single-site chain pinned at phi_0 = 0.

    Quadratic action with the left-point rule: the potential sits on
    slices 0..N_t-1, so the free endpoint slice N_t carries no potential.
    """
    n = n_time
    prec = np.zeros((n, n))
    for k in range(n):  # variables phi_1..phi_N
        prec[k, k] += 2.0 if k < n - 1 else 1.0
        if k + 1 < n:
            prec[k, k + 1] -= 1.0
            prec[k + 1, k] -= 1.0
    prec *= mass / (hbar * a_t)
    for k in range(n - 1):  # potential on slices 1..N_t-1 (slice 0 is pinned at 0)
        prec[k, k] += a_t * omega**2 / hbar
    return np.linalg.inv(prec)


def periodic_chain_covariance(n_time, a_t, omega, mass=1.0, hbar=1.0):
    """Covariance of a single-site time-periodic harmonic lattice."""
    n = n_time
    prec = (mass / (hbar * a_t)) * (2.0 * np.eye(n)
                                    - np.eye(n, k=1) - np.eye(n, k=-1))
    prec[0, -1] -= mass / (hbar * a_t)
    prec[-1, 0] -= mass / (hbar * a_t)
    prec += (a_t * omega**2 / hbar) * np.eye(n)
    return np.linalg.inv(prec)


def gaussian_weight_expectation(cov, mean, q_diag):
    """E[exp(-0.5 x^T Q x)] for x ~ N(mean, cov) with diagonal Q >= 0.

    Standard Gaussian integral:
    det(I + cov Q)^(-1/2) exp(-0.5 mean^T Q (I + cov Q)^(-1) mean).
    """
    q = np.diag(q_diag)
    m = np.eye(len(q_diag)) + cov @ q
    arg = -0.5 * mean @ q @ np.linalg.solve(m, mean)
    return np.exp(arg) / np.sqrt(np.linalg.det(m))


def exact_lattice_energy(beta, omega, a_t):
    """Exact thermal energy of the single-site harmonic lattice (m = hbar = 1).

    U = -d(log Z)/d(beta) at fixed slice count, evaluated as a normal-mode
    sum; this is the zero-noise value of the lattice energy estimator."""
    n = round(beta / a_t)
    theta = 2.0 * np.pi * np.arange(n) / n
    return float(a_t * omega**2 * np.mean(1.0 / (2.0 - 2.0 * np.cos(theta)
                                                 + a_t**2 * omega**2)))


def exact_lattice_specific_heat(beta, omega, a_t, eps=1e-6):
    """Zero-noise lattice specific heat: -beta^2 dU/dbeta at fixed N_t."""
    n = round(beta / a_t)
    u = [exact_lattice_energy((a_t + s * eps) * n, omega, a_t + s * eps)
         for s in (+1, -1)]
    return float(-beta**2 * (u[0] - u[1]) / (2.0 * eps * n))
