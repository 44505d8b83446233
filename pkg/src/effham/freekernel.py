"""Closed-form kernels and the harmonic-chain (Klein-Gordon) reference.

Everything here is analytic: the free Euclidean propagator, the Gaussian
endpoint density it induces, free-action matrix elements between box
states, and the normal-mode thermodynamics of the lambda = 0 chain that
serves as the baseline for free-energy reweighting and for oracle tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class FreeKernelParams:
    mass: float
    hbar: float
    transition_time: float

    def __post_init__(self):
        if self.mass <= 0 or self.hbar <= 0:
            raise ConfigurationError("mass and hbar must be > 0")
        if self.transition_time <= 0:
            raise ConfigurationError(
                f"transition_time must be > 0, got {self.transition_time}"
            )


def free_propagator(x, y, fp: FreeKernelParams):
    """Free-particle Euclidean kernel sqrt(m/(2 pi hbar T)) exp(-m (x-y)^2 / (2 hbar T)).

    Strictly positive, symmetric in (x, y), and normalized to unit integral
    over x, so it doubles as the endpoint probability density.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    norm = np.sqrt(fp.mass / (2.0 * np.pi * fp.hbar * fp.transition_time))
    out = norm * np.exp(-fp.mass * (x - y) ** 2 / (2.0 * fp.hbar * fp.transition_time))
    return out if out.ndim else float(out)


def gaussian_endpoint_sigma(fp: FreeKernelParams) -> float:
    """Width sigma = sqrt(hbar T / m) of the free endpoint distribution."""
    return float(np.sqrt(fp.hbar * fp.transition_time / fp.mass))


def free_matrix_element(node_i, node_j, weights, fp: FreeKernelParams) -> float:
    """Free-action amplitude between two box states.

    sqrt(w_i w_j) * prod_n G0(node_i[n], node_j[n]; T).  For a regular
    basis with w_i = w_j = dx this reduces to dx * prod G0.
    """
    w_i, w_j = weights
    if w_i <= 0 or w_j <= 0:
        raise ConfigurationError(f"box weights must be > 0, got {(w_i, w_j)}")
    node_i = np.atleast_1d(np.asarray(node_i, dtype=float))
    node_j = np.atleast_1d(np.asarray(node_j, dtype=float))
    if node_i.shape != node_j.shape:
        raise ConfigurationError("nodes must have equal dimension")
    return float(np.sqrt(w_i * w_j) * np.prod(free_propagator(node_i, node_j, fp)))


def kg_normal_modes(n_sites: int, omega: float, omega0: float, boundary="periodic"):
    """Normal-mode frequencies of the lambda = 0 chain, sorted ascending.

    Periodic chain: omega_k = sqrt(omega0^2 + 4 omega^2 sin^2(pi k / N_s)).
    Open chain:     omega_k = sqrt(omega0^2 + 4 omega^2 sin^2(pi k / (2 N_s))).
    """
    if n_sites < 1:
        raise ConfigurationError(f"n_sites must be >= 1, got {n_sites}")
    k = np.arange(n_sites)
    if boundary == "periodic":
        arg = np.pi * k / n_sites
    elif boundary == "open":
        arg = np.pi * k / (2 * n_sites)
    else:
        raise ConfigurationError(f"unknown boundary {boundary!r}")
    return np.sort(np.sqrt(omega0**2 + 4.0 * omega**2 * np.sin(arg) ** 2))


def kg_free_energy(beta: float, modes, hbar: float = 1.0) -> float:
    """F = sum_k [ hbar w_k / 2 + log(1 - exp(-beta hbar w_k)) / beta ].

    Includes the zero-point energy, so it is directly comparable to
    absolute effective-spectrum energies.
    """
    if beta <= 0:
        raise ConfigurationError(f"beta must be > 0, got {beta}")
    x = beta * hbar * np.asarray(modes, dtype=float)
    return float(np.sum(hbar * np.asarray(modes) / 2.0 + np.log1p(-np.exp(-x)) / beta))


def kg_thermo(beta: float, modes, hbar: float = 1.0, kb: float = 1.0):
    """Analytic (F, U, S, C) of independent oscillator modes.

    Per mode: U = hbar w (1/2 + 1/(e^{beta hbar w} - 1)) and
    C = kb (beta hbar w)^2 e^{beta hbar w} / (e^{beta hbar w} - 1)^2,
    evaluated in overflow-safe form.  Satisfies S = kb beta (U - F).
    """
    if beta <= 0:
        raise ConfigurationError(f"beta must be > 0, got {beta}")
    w = np.asarray(modes, dtype=float)
    x = beta * hbar * w
    occ = np.exp(-x) / (-np.expm1(-x))  # 1/(e^x - 1)
    f = kg_free_energy(beta, modes, hbar)
    u = float(np.sum(hbar * w * (0.5 + occ)))
    c = float(kb * np.sum(x**2 * np.exp(-x) / np.expm1(-x) ** 2))
    s = kb * beta * (u - f)
    return f, u, s, c
