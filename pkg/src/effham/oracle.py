"""Independent ground truth at desk scale.

Dense finite-difference diagonalization of the one- and two-site
Schroedinger problems, the closed-form harmonic (Mehler) kernel, and
analytic oscillator thermodynamics.  Tests and the compare pipeline use
these; the main method never does.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .basis import Basis
from .errors import ConfigurationError
from .freekernel import free_propagator, FreeKernelParams, kg_thermo
from .hamiltonian import TransitionMatrix
from .model import ModelParams
from .thermo import ThermoPoint

_BOUNDARY_DENSITY_LIMIT = 1e-8


@dataclass(frozen=True)
class GridSpec:
    points_per_dim: int
    x_min: float
    x_max: float
    dimension: int = 1

    def __post_init__(self):
        if self.points_per_dim < 16:
            raise ConfigurationError("grid needs at least 16 points per dimension")
        if self.x_max <= self.x_min:
            raise ConfigurationError("grid needs x_max > x_min")
        if self.dimension not in (1, 2):
            raise ConfigurationError("dense grid oracle supports dimension 1 or 2 only")

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.points_per_dim - 1)


def _onsite_potential(x, mp: ModelParams):
    return 0.5 * mp.omega0**2 * x**2 + 0.5 * mp.lam * x**4


def grid_spectrum(mp: ModelParams, grid: GridSpec, n_levels: int = 8):
    """Lowest eigenpairs of the chain Hamiltonian on a dense grid.

    Second-order central differences for the kinetic term (convergence is
    O(h^2) in the grid spacing).  For dimension 2 the two sites couple
    through omega^2 (phi_2 - phi_1)^2, i.e. the periodic two-site chain
    where the single bond is counted twice.  Warns if the ground state
    leaks onto the box boundary.
    """
    x = np.linspace(grid.x_min, grid.x_max, grid.points_per_dim)
    h = grid.spacing
    t = mp.hbar**2 / (2.0 * mp.mass * h**2)
    n = grid.points_per_dim
    kin1d = np.diag(np.full(n, 2.0 * t)) - np.diag(np.full(n - 1, t), 1) \
        - np.diag(np.full(n - 1, t), -1)
    if grid.dimension == 1:
        ham = kin1d + np.diag(_onsite_potential(x, mp))
    else:
        eye = np.eye(n)
        v = (_onsite_potential(x, mp)[:, None] + _onsite_potential(x, mp)[None, :]
             + mp.omega**2 * (x[:, None] - x[None, :]) ** 2)
        ham = np.kron(kin1d, eye) + np.kron(eye, kin1d) + np.diag(v.ravel())
    n_levels = min(n_levels, ham.shape[0])
    energies, vectors = scipy.linalg.eigh(
        ham, subset_by_index=(0, n_levels - 1))
    vectors = vectors / h ** (grid.dimension / 2.0)  # grid-measure normalization
    ground = np.abs(vectors[:, 0]) ** 2
    if grid.dimension == 1:
        edge = max(ground[0], ground[-1])
    else:
        g = ground.reshape(n, n)
        edge = max(g[0].max(), g[-1].max(), g[:, 0].max(), g[:, -1].max())
    if edge > _BOUNDARY_DENSITY_LIMIT:
        warnings.warn(
            f"ground-state density {edge:.2e} at the box boundary exceeds "
            f"{_BOUNDARY_DENSITY_LIMIT}; enlarge the box", stacklevel=2)
    return energies, vectors


def grid_spectrum_richardson(mp: ModelParams, grid: GridSpec, n_levels: int = 8,
                             refine: float = 1.5):
    """h^2-extrapolated grid energies from two spacings (coarse, fine)."""
    fine = GridSpec(int(round(grid.points_per_dim * refine)),
                    grid.x_min, grid.x_max, grid.dimension)
    e1, _ = grid_spectrum(mp, grid, n_levels)
    e2, _ = grid_spectrum(mp, fine, n_levels)
    h1, h2 = grid.spacing, fine.spacing
    return (e2 * h1**2 - e1 * h2**2) / (h1**2 - h2**2)


def mehler_kernel(x, y, transition_time, mass: float = 1.0, omega: float = 1.0,
                  hbar: float = 1.0):
    """Closed-form Euclidean harmonic-oscillator kernel.

    sqrt(m w / (2 pi hbar sinh wT)) *
    exp(-m w [(x^2 + y^2) cosh wT - 2 x y] / (2 hbar sinh wT)).
    Reduces to the free propagator as w -> 0.
    """
    if transition_time <= 0 or omega <= 0:
        raise ConfigurationError("mehler_kernel needs T > 0 and omega > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    wt = omega * transition_time
    s, ch = np.sinh(wt), np.cosh(wt)
    pref = np.sqrt(mass * omega / (2.0 * np.pi * hbar * s))
    out = pref * np.exp(-mass * omega * ((x**2 + y**2) * ch - 2.0 * x * y)
                        / (2.0 * hbar * s))
    return out if out.ndim else float(out)


def mehler_matrix(basis: Basis, transition_time: float, mass: float = 1.0,
                  omega: float = 1.0, hbar: float = 1.0) -> TransitionMatrix:
    """Noise-free 1-D transition matrix from the exact harmonic kernel."""
    if basis.dimension != 1:
        raise ConfigurationError("mehler_matrix is 1-D only")
    x = basis.positions[:, 0]
    k = mehler_kernel(x[:, None], x[None, :], transition_time, mass, omega, hbar)
    w = np.sqrt(basis.weights)
    values = w[:, None] * k * w[None, :]
    values = 0.5 * (values + values.T)  # exact symmetry despite rounding
    return TransitionMatrix(values, np.zeros_like(values), transition_time, basis)


def free_matrix(basis: Basis, fp: FreeKernelParams) -> TransitionMatrix:
    """Noise-free transition matrix of the free theory in any dimension."""
    pos = basis.positions
    k = np.ones((len(basis), len(basis)))
    for d in range(basis.dimension):
        k *= free_propagator(pos[:, d][:, None], pos[:, d][None, :], fp)
    w = np.sqrt(basis.weights)
    values = w[:, None] * k * w[None, :]
    values = 0.5 * (values + values.T)
    return TransitionMatrix(values, np.zeros_like(values), fp.transition_time, basis)


def harmonic_reference(beta: float, omega_list, hbar: float = 1.0,
                       kb: float = 1.0) -> ThermoPoint:
    """Analytic thermodynamics of independent oscillator modes."""
    f, u, s, c = kg_thermo(beta, np.asarray(omega_list, dtype=float), hbar, kb)
    log_z = -beta * f
    return ThermoPoint(beta=beta, z=float(np.exp(log_z)), log_z=float(log_z),
                       f=f, f_err=0.0, u=u, u_err=0.0, s=s, s_err=0.0,
                       c=c, c_err=0.0, source="analytic")
