"""Transition-matrix assembly, diagonalization and error propagation.

The amplitude between two basis nodes over Euclidean time T factorizes
into the analytic free part and a bridge average,

    M_ij(T) = sqrt(w_i w_j) [prod_n G0(x_i[n], x_j[n]; T)] * <exp(-S_V/hbar)>,

with the average taken over free-action bridges from node j to node i.
Diagonalizing the symmetric positive matrix M = U^T D U and taking
E_k = -(hbar/T) log D_k yields the effective low-energy spectrum; the
columns of U are the eigenstates over the basis nodes.  Statistical
errors are propagated by re-diagonalizing M + dM and M - dM, which
brackets the eigenvalues from above and below.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .basis import Basis
from .errors import ConfigurationError, NumericalError
from .freekernel import FreeKernelParams, free_matrix_element
from .model import LatticeParams, ModelParams
from .sampler import RngStream, estimate_sv_factor

log = logging.getLogger(__name__)

_VALUE_FLOOR = 1e-300


@dataclass
class TransitionMatrix:
    values: np.ndarray            # (N, N), exactly symmetric after assembly
    errors: np.ndarray            # (N, N), entrywise statistical errors >= 0
    transition_time: float
    basis: Basis

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        n = len(self.basis)
        if self.values.shape != (n, n) or self.errors.shape != (n, n):
            raise ConfigurationError("matrix shape does not match basis size")


@dataclass
class EffectiveSpectrum:
    """Retained energy levels, ascending, with eigenvectors over the basis."""

    energies: np.ndarray          # (n_retained,)
    errors: np.ndarray            # (n_retained,), filled by propagate_errors
    eigenvectors: np.ndarray      # (N, n_retained), orthonormal columns
    n_retained: int
    n_discarded: int
    transition_time: float
    hbar: float
    raw_eigenvalues: np.ndarray   # all N transfer eigenvalues, descending


def matrix_element(i: int, j: int, basis: Basis, mp: ModelParams,
                   lp: LatticeParams, n_bridges: int, rng: RngStream):
    """One amplitude M_ij with its statistical error.

    The bridge runs from node j (t = 0) to node i (t = T); the free
    prefactor is exact, so the error is prefactor * stderr of the
    potential-weight average.
    """
    fp = FreeKernelParams(mp.mass, mp.hbar, lp.total_time)
    pre = free_matrix_element(basis.positions[i], basis.positions[j],
                              (basis.weights[i], basis.weights[j]), fp)
    stats = estimate_sv_factor(basis.positions[j], basis.positions[i],
                               n_bridges, lp, mp, rng)
    return pre * stats.mean, pre * stats.std_error


def assemble(basis: Basis, mp: ModelParams, lp: LatticeParams, n_bridges: int,
             rng: RngStream, workers: int = 1) -> TransitionMatrix:
    """Compute the full transition matrix over a basis.

    Only the upper triangle is sampled (one derived stream per entry);
    entries are mirrored, so the result is exactly symmetric and costs
    N(N+1)/2 bridge ensembles regardless of worker count.
    """
    n = len(basis)
    if lp.n_sites != basis.dimension:
        raise ConfigurationError(
            f"basis dimension {basis.dimension} != lattice n_sites {lp.n_sites}")
    values = np.zeros((n, n))
    errors = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i, n)]

    def compute(pair):
        i, j = pair
        return matrix_element(i, j, basis, mp, lp, n_bridges, rng.child(i, j))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(compute, pairs))
    else:
        results = [compute(p) for p in pairs]

    floored = 0
    for (i, j), (val, err) in zip(pairs, results):
        if val <= 0.0:
            floored += 1
            val = _VALUE_FLOOR
        values[i, j] = values[j, i] = val
        errors[i, j] = errors[j, i] = err
    if floored:
        log.warning("%d matrix entries were nonpositive (underflow) and "
                    "floored at %g", floored, _VALUE_FLOOR)
    return TransitionMatrix(values, errors, lp.total_time, basis)


def _eigensolve(values, transition_time, hbar):
    """Symmetric eigensolve; keep D_k > 0, return ascending energies."""
    d, u = scipy.linalg.eigh(values)
    d, u = d[::-1], u[:, ::-1]          # descending D = ascending E
    keep = d > 0.0
    energies = -(hbar / transition_time) * np.log(d[keep])
    return energies, u[:, keep], d


def diagonalize(matrix: TransitionMatrix, hbar: float = 1.0) -> EffectiveSpectrum:
    """Extract the effective spectrum from a symmetric transition matrix.

    Transfer eigenvalues D_k <= 0 (a routine artifact of Monte Carlo
    noise at high k) are discarded and counted; if none are positive the
    basis or the statistics were inadequate and this raises.
    """
    values = np.asarray(matrix.values)
    if not np.array_equal(values, values.T):
        raise ConfigurationError("transition matrix must be exactly symmetric")
    energies, vectors, d = _eigensolve(values, matrix.transition_time, hbar)
    if energies.size == 0:
        raise NumericalError(
            "no positive transfer eigenvalues: the basis cannot resolve any "
            "level at this statistics; enlarge n_bridges or rebuild the basis")
    n_ret = energies.size
    if n_ret < d.size:
        log.info("discarded %d of %d transfer eigenvalues (D_k <= 0)",
                 d.size - n_ret, d.size)
    return EffectiveSpectrum(
        energies=energies, errors=np.zeros(n_ret), eigenvectors=vectors,
        n_retained=n_ret, n_discarded=int(d.size - n_ret),
        transition_time=matrix.transition_time, hbar=hbar, raw_eigenvalues=d)


def propagate_errors(matrix: TransitionMatrix,
                     spectrum: EffectiveSpectrum) -> EffectiveSpectrum:
    """Attach per-level error bars from the entrywise M +- dM bracket.

    Both shifted matrices are re-diagonalized; the bar for level k is the
    larger of its two displacements, matching levels by sorted index.
    Levels that drop out of a perturbed spectrum get an infinite bar.
    """
    displacements = []
    for sign in (+1.0, -1.0):
        shifted = matrix.values + sign * matrix.errors
        shifted = 0.5 * (shifted + shifted.T)
        energies, _, _ = _eigensolve(shifted, matrix.transition_time, spectrum.hbar)
        m = min(spectrum.n_retained, energies.size)
        if m < spectrum.n_retained:
            log.warning("perturbed matrix (%+g dM) retains only %d of %d levels; "
                        "the missing bars are infinite", sign, m, spectrum.n_retained)
        disp = np.full(spectrum.n_retained, np.inf)
        disp[:m] = np.abs(energies[:m] - spectrum.energies[:m])
        displacements.append(disp)
    return replace(spectrum, errors=np.maximum(*displacements))


def spectrum_with_errors(matrix: TransitionMatrix, hbar: float = 1.0) -> EffectiveSpectrum:
    return propagate_errors(matrix, diagonalize(matrix, hbar))


def flag_unresolved_levels(spectrum: EffectiveSpectrum) -> np.ndarray:
    """Boolean mask of levels whose error bar exceeds half the local gap.

    A recommended cut for downstream use; all retained levels are still
    reported.
    """
    e = spectrum.energies
    if e.size < 2:
        return np.zeros(e.size, dtype=bool)
    gaps = np.diff(e)
    local = np.empty(e.size)
    local[0] = gaps[0]
    local[-1] = gaps[-1]
    local[1:-1] = np.minimum(gaps[1:], gaps[:-1])  # nearest-neighbour spacing
    return spectrum.errors > 0.5 * local


def save_spectrum(path, spectrum: EffectiveSpectrum, header_lines=()):
    """Text table, one row per retained level: k (1-based), energy, error."""
    flags = flag_unresolved_levels(spectrum)
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# transition_time = {spectrum.transition_time:.17g}\n")
        fh.write(f"# n_retained = {spectrum.n_retained} "
                 f"n_discarded = {spectrum.n_discarded}\n")
        fh.write("# columns: k E_eff error\n")
        for k in range(spectrum.n_retained):
            fh.write(f"{k + 1} {spectrum.energies[k]:.17g} "
                     f"{spectrum.errors[k]:.17g}\n")
        if flags.any():
            noisy = " ".join(str(k + 1) for k in np.nonzero(flags)[0])
            fh.write(f"# recommended cut: levels with error above half the "
                     f"local gap: {noisy}\n")


def load_spectrum_table(path):
    """Read back (energies, errors) from a spectrum table."""
    energies, errors = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            energies.append(float(parts[1]))
            errors.append(float(parts[2]))
    if not energies:
        raise ConfigurationError(f"no spectrum rows found in {path}")
    return np.asarray(energies), np.asarray(errors)


def save_matrix(path, matrix: TransitionMatrix, header_lines=()):
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# transition matrix, n = {len(matrix.basis)}, "
                 f"T = {matrix.transition_time:.17g}\n")
        fh.write("# columns: i j value error\n")
        n = len(matrix.basis)
        for i in range(n):
            for j in range(n):
                fh.write(f"{i} {j} {matrix.values[i, j]:.17g} "
                         f"{matrix.errors[i, j]:.17g}\n")
