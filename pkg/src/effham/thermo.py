"""Thermodynamics on a beta grid from a discrete energy spectrum.

Given levels E_k the canonical observables are

    Z = sum_k exp(-beta E_k)            F = -log(Z) / beta
    U = <E>                             C = kb beta^2 (<E^2> - <E>^2)
    S = kb beta (U - F)                 P = -dF / dV  (finite difference)

All sums are evaluated with the ground-state shift exp(-beta (E - E_min))
so arbitrarily large beta * E stays finite.  Error bars re-evaluate every
observable on the bracketed spectra E +- dE and take the larger
displacement, mirroring the matrix-level error treatment upstream.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

log = logging.getLogger(__name__)

# beta range over which a fixed-transition-time spectrum is trusted;
# rows outside are flagged as extrapolation in CLI output
TEMPERATURE_WINDOW = (1.0, 10.0)


@dataclass
class ThermoPoint:
    beta: float
    z: float
    log_z: float
    f: float
    f_err: float
    u: float
    u_err: float
    s: float
    s_err: float
    c: float
    c_err: float
    source: str = "hamiltonian"


def _observables(energies, beta, kb):
    e_min = energies.min()
    w = np.exp(-beta * (energies - e_min))
    zs = w.sum()
    w /= zs
    log_z = -beta * e_min + np.log(zs)
    f = e_min - np.log(zs) / beta
    u = float(np.dot(w, energies))
    var = float(np.dot(w, (energies - u) ** 2))
    c = kb * beta**2 * var
    s = kb * (beta * (u - e_min) + np.log(zs))  # = kb beta (u - f), always >= 0
    return log_z, f, u, s, c


def thermo_from_levels(energies, beta_grid, kb: float = 1.0, errors=None,
                       source: str = "hamiltonian") -> list[ThermoPoint]:
    """Thermodynamic table from raw levels with optional error bars."""
    energies = np.asarray(energies, dtype=float)
    if energies.size == 0:
        raise ConfigurationError("spectrum is empty")
    beta_grid = np.asarray(beta_grid, dtype=float)
    if np.any(beta_grid <= 0):
        raise ConfigurationError("every beta must be > 0")
    if errors is None:
        errors = np.zeros_like(energies)
    errors = np.asarray(errors, dtype=float)
    if not np.all(np.isfinite(errors)):
        log.warning("non-finite level error bars are ignored in the thermo bracket")
        errors = np.where(np.isfinite(errors), errors, 0.0)

    points = []
    for beta in beta_grid:
        log_z, f, u, s, c = _observables(energies, beta, kb)
        brackets = np.zeros((2, 4))
        for row, sign in enumerate((+1.0, -1.0)):
            _, fb, ub, sb, cb = _observables(energies + sign * errors, beta, kb)
            brackets[row] = (abs(fb - f), abs(ub - u), abs(sb - s), abs(cb - c))
        f_err, u_err, s_err, c_err = brackets.max(axis=0)
        points.append(ThermoPoint(
            beta=float(beta), z=float(np.exp(log_z)), log_z=float(log_z),
            f=f, f_err=f_err, u=u, u_err=u_err, s=s, s_err=s_err,
            c=c, c_err=c_err, source=source))
    return points


def thermo_from_spectrum(spectrum, beta_grid, kb: float = 1.0,
                         source: str = "hamiltonian") -> list[ThermoPoint]:
    """Thermodynamics from an EffectiveSpectrum (uses its error bars)."""
    return thermo_from_levels(spectrum.energies, beta_grid, kb=kb,
                              errors=spectrum.errors, source=source)


@dataclass
class PressurePoint:
    beta: float
    p: float
    p_err: float


def pressure_finite_difference(points_v: list[ThermoPoint],
                               points_v_dv: list[ThermoPoint],
                               delta_v: float) -> list[PressurePoint]:
    """P = -(F(V + dV) - F(V)) / dV per grid point, errors in quadrature.

    dV is realized upstream by re-running the pipeline with one extra
    site (dV = a_s)."""
    if delta_v <= 0:
        raise ConfigurationError(f"delta_v must be > 0, got {delta_v}")
    if len(points_v) != len(points_v_dv):
        raise ConfigurationError("pressure tables have different lengths")
    out = []
    for a, b in zip(points_v, points_v_dv):
        if abs(a.beta - b.beta) > 1e-12 * max(1.0, abs(a.beta)):
            raise ConfigurationError(
                f"beta grids differ: {a.beta} vs {b.beta}")
        out.append(PressurePoint(
            beta=a.beta, p=-(b.f - a.f) / delta_v,
            p_err=float(np.hypot(a.f_err, b.f_err)) / delta_v))
    return out


@dataclass
class ConsistencyReport:
    n_points: int
    tol: float
    max_u_residual: float      # relative, U vs d(beta F)/d beta
    max_c_residual: float      # relative, C vs -kb beta^2 dU/d beta
    f_nondecreasing: bool
    u_nonincreasing: bool
    s_nonnegative: bool
    c_nonnegative: bool
    violations: list

    @property
    def passed(self) -> bool:
        return (self.max_u_residual <= self.tol and self.max_c_residual <= self.tol
                and self.f_nondecreasing and self.u_nonincreasing
                and self.s_nonnegative and self.c_nonnegative)


def _derivative(values, h, i, order5):
    if order5:
        return (-values[i + 2] + 8 * values[i + 1]
                - 8 * values[i - 1] + values[i - 2]) / (12 * h)
    return (values[i + 1] - values[i - 1]) / (2 * h)


def consistency_checks(points: list[ThermoPoint], kb: float = 1.0,
                       tol: float = 1e-6) -> ConsistencyReport:
    """Audit a thermo table against the defining identities.

    Checks U = d(beta F)/d beta and C = -kb beta^2 dU/d beta with central
    finite differences (5-point stencils where the uniform grid allows,
    fourth-order accurate), plus the monotonicity and sign constraints
    that hold for any discrete spectrum.
    """
    if len(points) < 3:
        raise ConfigurationError("need at least 3 grid points")
    beta = np.array([p.beta for p in points])
    f = np.array([p.f for p in points])
    u = np.array([p.u for p in points])
    s = np.array([p.s for p in points])
    c = np.array([p.c for p in points])
    h = np.diff(beta)
    if np.max(np.abs(h - h[0])) > 1e-9 * abs(h[0]):
        raise ConfigurationError("consistency checks need a uniform beta grid")
    h = float(h[0])

    order5 = len(points) >= 5
    lo, hi = (2, len(points) - 2) if order5 else (1, len(points) - 1)
    scale = float(np.max(np.abs(u)))
    bf = beta * f
    max_u = 0.0
    max_c = 0.0
    violations = []
    for i in range(lo, hi):
        u_fd = _derivative(bf, h, i, order5)
        c_fd = -kb * beta[i] ** 2 * _derivative(u, h, i, order5)
        ru = abs(u_fd - u[i]) / max(abs(u[i]), 1e-9 * scale)
        rc = abs(c_fd - c[i]) / max(abs(c[i]), 1e-9 * scale)
        max_u = max(max_u, ru)
        max_c = max(max_c, rc)
        if ru > tol:
            violations.append((beta[i], "U", ru))
        if rc > tol:
            violations.append((beta[i], "C", rc))

    eps = 1e-12 * max(scale, 1.0)
    return ConsistencyReport(
        n_points=len(points), tol=tol, max_u_residual=max_u, max_c_residual=max_c,
        f_nondecreasing=bool(np.all(np.diff(f) >= -eps)),
        u_nonincreasing=bool(np.all(np.diff(u) <= eps)),
        s_nonnegative=bool(np.all(s >= -eps)),
        c_nonnegative=bool(np.all(c >= -eps)),
        violations=violations)


def save_thermo_table(path, points: list[ThermoPoint], header_lines=()):
    """Plot-ready whitespace table: beta F F_err U U_err S S_err C C_err."""
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        if points:
            fh.write(f"# source = {points[0].source}\n")
        fh.write(f"# temperature_window_beta = {TEMPERATURE_WINDOW[0]:g} "
                 f"{TEMPERATURE_WINDOW[1]:g}\n")
        outside = [p.beta for p in points
                   if not TEMPERATURE_WINDOW[0] <= p.beta <= TEMPERATURE_WINDOW[1]]
        if outside:
            fh.write("# out_of_window_beta = "
                     + " ".join(f"{b:.17g}" for b in outside) + "\n")
        fh.write("# columns: beta F F_err U U_err S S_err C C_err\n")
        for p in points:
            fh.write(" ".join(f"{v:.17g}" for v in (
                p.beta, p.f, p.f_err, p.u, p.u_err,
                p.s, p.s_err, p.c, p.c_err)) + "\n")


def load_thermo_table(path) -> list[ThermoPoint]:
    source = "unknown"
    points = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "source =" in line:
                    source = line.split("=", 1)[1].strip()
                continue
            v = [float(x) for x in line.split()]
            points.append(ThermoPoint(
                beta=v[0], z=np.nan, log_z=np.nan,
                f=v[1], f_err=v[2], u=v[3], u_err=v[4],
                s=v[5], s_err=v[6], c=v[7], c_err=v[8], source=source))
    if not points:
        raise ConfigurationError(f"no thermo rows found in {path}")
    return points
