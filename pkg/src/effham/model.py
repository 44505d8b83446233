"""Discretized Euclidean action of a chain of coupled anharmonic oscillators.

The model is a 1-D chain of N_s unit-mass oscillators phi_n with
nearest-neighbour coupling, an on-site quadratic term and a quartic term.
On a time lattice with N_t steps of spacing a_t the action is

    S = sum_{k=0}^{N_t-1} a_t sum_{n=1}^{N_s} [ m (phi(n,k+1) - phi(n,k))^2 / (2 a_t^2)
          + (Omega^2/2) (phi(n+1,k) - phi(n,k))^2
          + (Omega0^2/2) phi(n,k)^2 + (lambda/2) phi(n,k)^4 ]

All potential terms are evaluated at the earlier slice k (left-point rule),
so a fixed-endpoint path carries the potential of slice 0 but not of slice
N_t.  The spatial boundary is PERIODIC by default (site N_s+1 is site 1);
an open chain is available via ``ModelParams.boundary = "open"``.  Under
the substitution Phi = phi / sqrt(a_s), m_field = Omega0, g = 12 lambda,
a_s = 1/Omega this is the standard scalar phi^4 lattice action in 1+1
dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

BOUNDARIES = ("periodic", "open")


@dataclass(frozen=True)
class ModelParams:
    """Physical couplings of the oscillator chain.

    omega    nearest-neighbour coupling Omega (equals 1/a_s under the
             field identification)
    omega0   on-site frequency Omega0
    lam      quartic coupling lambda
    mass     kinetic mass of the chain variables (1 for the phi fields)
    hbar, kb Planck and Boltzmann constants, kept explicit so tests can
             vary them (defaults 1)
    boundary spatial boundary condition, "periodic" or "open"
    """

    omega: float = 1.0
    omega0: float = 2.0
    lam: float = 1.0
    mass: float = 1.0
    hbar: float = 1.0
    kb: float = 1.0
    boundary: str = "periodic"

    def __post_init__(self):
        # omega0 = 0 is allowed so the free theory remains expressible
        if self.omega0 < 0:
            raise ConfigurationError(f"omega0 must be >= 0, got {self.omega0}")
        if self.lam < 0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lam}")
        if self.mass <= 0 or self.hbar <= 0 or self.kb <= 0:
            raise ConfigurationError("mass, hbar and kb must all be > 0")
        if self.omega < 0:
            raise ConfigurationError(f"omega must be >= 0, got {self.omega}")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARIES}")


@dataclass(frozen=True)
class LatticeParams:
    """Space-time lattice geometry.

    The total Euclidean transition time is always n_time * a_t exactly;
    it equals beta * hbar when the lattice realizes a thermal trace.
    """

    n_sites: int
    n_time: int
    a_t: float
    a_s: float = 1.0

    def __post_init__(self):
        if self.n_sites < 1:
            raise ConfigurationError(f"n_sites must be >= 1, got {self.n_sites}")
        if self.n_time < 2:
            raise ConfigurationError(f"n_time must be >= 2, got {self.n_time}")
        if self.a_t <= 0 or self.a_s <= 0:
            raise ConfigurationError("lattice spacings must be > 0")

    @property
    def total_time(self) -> float:
        return self.n_time * self.a_t

    @classmethod
    def from_total_time(cls, n_sites, n_time, total_time, a_s=1.0):
        return cls(n_sites=n_sites, n_time=n_time, a_t=total_time / n_time, a_s=a_s)


@dataclass
class FieldPath:
    """One discretized trajectory of the chain.

    values has shape (n_time + 1, n_sites) for a fixed-endpoint path
    (slices 0 and n_time are boundary data, never updated by samplers)
    and shape (n_time, n_sites) for a time-periodic path, where slice
    n_time is identified with slice 0.
    """

    values: np.ndarray
    periodic_time: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ConfigurationError("path values must be a 2-D array [slice, site]")

    @property
    def n_time(self) -> int:
        return self.values.shape[0] - (0 if self.periodic_time else 1)

    @property
    def n_sites(self) -> int:
        return self.values.shape[1]

    def check_matches(self, lp: LatticeParams):
        if self.n_time != lp.n_time or self.n_sites != lp.n_sites:
            raise ConfigurationError(
                f"path shape {self.values.shape} (periodic_time={self.periodic_time}) "
                f"does not match lattice n_time={lp.n_time}, n_sites={lp.n_sites}"
            )


def _slice_pairs(values, periodic_time):
    """Return (phi_k, phi_{k+1}) site arrays for the N_t time links.

    values may carry leading batch axes; time is axis -2, site axis -1.
    """
    if periodic_time:
        phi = values
        nxt = np.roll(values, -1, axis=-2)
    else:
        phi = values[..., :-1, :]
        nxt = values[..., 1:, :]
    return phi, nxt


def _site_potential(phi, mp: ModelParams):
    """Potential density summed over sites for each slice (no a_t factor)."""
    v = 0.5 * mp.omega0**2 * phi**2 + 0.5 * mp.lam * phi**4
    total = v.sum(axis=(-2, -1))
    if mp.omega != 0.0 and phi.shape[-1] > 1:
        if mp.boundary == "periodic":
            dphi = np.roll(phi, -1, axis=-1) - phi
        else:
            dphi = phi[..., 1:] - phi[..., :-1]
        total = total + 0.5 * mp.omega**2 * (dphi**2).sum(axis=(-2, -1))
    return total


def kinetic_action_batch(values, periodic_time, mp: ModelParams, lp: LatticeParams):
    phi, nxt = _slice_pairs(values, periodic_time)
    return (mp.mass / (2.0 * lp.a_t)) * ((nxt - phi) ** 2).sum(axis=(-2, -1))


def potential_action_batch(values, periodic_time, mp: ModelParams, lp: LatticeParams):
    phi, _ = _slice_pairs(values, periodic_time)
    return lp.a_t * _site_potential(phi, mp)


def split_action(path: FieldPath, mp: ModelParams, lp: LatticeParams):
    """Split S into (kinetic S0, potential SV) with S0 + SV = total_action."""
    path.check_matches(lp)
    s0 = kinetic_action_batch(path.values, path.periodic_time, mp, lp)
    sv = potential_action_batch(path.values, path.periodic_time, mp, lp)
    return float(s0), float(sv)


def total_action(path: FieldPath, mp: ModelParams, lp: LatticeParams) -> float:
    """Euclidean action of the path, in units of hbar * 1."""
    s0, sv = split_action(path, mp, lp)
    return s0 + sv


def action_at_derivatives(path: FieldPath, mp: ModelParams, lp: LatticeParams):
    """First and second derivatives of S with respect to a_t.

    Defined on time-periodic paths only (the thermal trace ensemble used
    by the lattice energy and specific-heat estimators).
    """
    if not path.periodic_time:
        raise ConfigurationError(
            "action_at_derivatives requires a time-periodic path; "
            "the estimators are defined on the trace ensemble"
        )
    path.check_matches(lp)
    d1, d2 = at_derivatives_batch(path.values, mp, lp)
    return float(d1), float(d2)


def at_derivatives_batch(values, mp: ModelParams, lp: LatticeParams):
    """Vectorized (dS/da_t, d2S/da_t2) over a batch of periodic configurations."""
    phi, nxt = _slice_pairs(values, periodic_time=True)
    kin_sq = ((nxt - phi) ** 2).sum(axis=(-2, -1))
    d1 = -mp.mass * kin_sq / (2.0 * lp.a_t**2) + _site_potential(phi, mp)
    d2 = mp.mass * kin_sq / lp.a_t**3
    return d1, d2
