"""Batch driver: spectrum | thermo | lattice | compare | oracle.

Every pipeline reads one flat config file, derives all randomness from
the single seed, and writes whitespace tables stamped with the full
configuration.  Data files are byte-identical for a given (config, seed)
regardless of worker count; run.log additionally records wall time and
is therefore outside that guarantee.

Exit codes: 0 success, 2 configuration error, 3 sampling failure,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import basis as basis_mod
from . import hamiltonian as ham
from . import thermo as thermo_mod
from .config import RunConfig, header_stamp, load_config
from .errors import ConfigurationError, NumericalError, SamplingError
from .freekernel import FreeKernelParams
from .lattice_thermo import LatticeThermoConfig, measure_beta_point
from .sampler import MetropolisConfig, RngStream, sample_endpoint_ensemble
from .thermo import TEMPERATURE_WINDOW

log = logging.getLogger("effham")

# stream ids for the pipeline stages, fixed forever for reproducibility
_STREAM_ENDPOINTS = 1
_STREAM_BASIS = 2
_STREAM_MATRIX = 3
_STREAM_LATTICE = 5


def _metropolis_config(cfg: RunConfig) -> MetropolisConfig:
    return MetropolisConfig(thermalization=cfg.statistics.thermalization,
                            decorrelation=cfg.statistics.decorrelation)


class _OutputSet:
    """Collects (path, writer) pairs; on failure removes what it wrote."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.written = []

    def write(self, name, writer):
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, name)
        try:
            writer(path)
        except Exception:
            self.cleanup()
            raise
        self.written.append(path)
        return path

    def cleanup(self):
        for path in self.written:
            try:
                os.remove(path)
            except OSError:
                pass


def run_spectrum(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    rng = RngStream(cfg.seed)
    stamp = header_stamp(cfg)
    mp, lp, st = cfg.model, cfg.lattice, cfg.statistics

    log_lines = []
    if cfg.basis.flavor == "regular":
        bas = basis_mod.build_regular_basis(cfg.basis.n_nodes, cfg.basis.x_min,
                                            cfg.basis.x_max)
        log_lines.append(f"regular basis: {len(bas)} nodes on "
                         f"[{cfg.basis.x_min}, {cfg.basis.x_max}]")
    else:
        ensemble = sample_endpoint_ensemble(st.n_configs, lp, mp,
                                            rng.child(_STREAM_ENDPOINTS),
                                            _metropolis_config(cfg))
        fp = FreeKernelParams(mp.mass, mp.hbar, lp.total_time)
        bas = basis_mod.build_stochastic_basis(
            ensemble.endpoints, cfg.basis.n_stoch, rng.child(_STREAM_BASIS),
            density_mode=cfg.basis.density, free_params=fp)
        log_lines.append(f"endpoint ensemble: {st.n_configs} paths, "
                         f"acceptance {ensemble.acceptance_rate:.4f}, "
                         f"step {ensemble.step:.5g}")
        log_lines.append(f"stochastic basis: {len(bas)} nodes, "
                         f"density mode {cfg.basis.density}")

    matrix = ham.assemble(bas, mp, lp, st.n_bridges, rng.child(_STREAM_MATRIX),
                          workers=cfg.workers)
    spectrum = ham.spectrum_with_errors(matrix, mp.hbar)
    log_lines.append(f"matrix: {len(bas)}x{len(bas)} at T = {lp.total_time:.6g}, "
                     f"{st.n_bridges} bridges per element")
    log_lines.append(f"spectrum: {spectrum.n_retained} levels retained, "
                     f"{spectrum.n_discarded} discarded (nonpositive transfer "
                     "eigenvalue)")

    out = _OutputSet(cfg.output_dir)
    paths = {
        "basis": out.write("basis.txt",
                           lambda p: basis_mod.save_basis(p, bas, stamp)),
        "matrix": out.write("matrix.txt",
                            lambda p: ham.save_matrix(p, matrix, stamp)),
        "spectrum": out.write("spectrum.txt",
                              lambda p: ham.save_spectrum(p, spectrum, stamp)),
    }
    elapsed = time.perf_counter() - t0
    log_lines.append(f"wall time: {elapsed:.2f} s")
    paths["log"] = out.write("run.log", lambda p: _write_log(p, log_lines))
    for line in log_lines:
        log.info("%s", line)
    return paths


def _write_log(path, lines):
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line + "\n")


def run_thermo(cfg: RunConfig, spectrum_path) -> dict:
    if not os.path.exists(spectrum_path):
        raise ConfigurationError(f"spectrum file not found: {spectrum_path}")
    energies, errors = ham.load_spectrum_table(spectrum_path)
    betas = cfg.beta_grid.betas()
    points = thermo_mod.thermo_from_levels(energies, betas, kb=cfg.model.kb,
                                           errors=errors, source="hamiltonian")
    _audit_table(points, cfg.model.kb)
    out = _OutputSet(cfg.output_dir)
    stamp = header_stamp(cfg) + [f"spectrum_file = {os.path.basename(spectrum_path)}"]
    path = out.write("thermo_hamiltonian.txt",
                     lambda p: thermo_mod.save_thermo_table(p, points, stamp))
    return {"thermo": path}


def _audit_table(points, kb):
    outside = [p.beta for p in points
               if not TEMPERATURE_WINDOW[0] <= p.beta <= TEMPERATURE_WINDOW[1]]
    if outside:
        log.warning("%d beta values outside the trusted window %s: %s",
                    len(outside), TEMPERATURE_WINDOW,
                    " ".join(f"{b:g}" for b in outside))
    betas = np.array([p.beta for p in points])
    if len(points) >= 3 and np.allclose(np.diff(betas), betas[1] - betas[0],
                                        rtol=1e-9):
        report = thermo_mod.consistency_checks(points, kb=kb, tol=1e-4)
        if not report.passed:
            log.warning("thermo table failed identity audit: max residuals "
                        "U %.3g, C %.3g", report.max_u_residual,
                        report.max_c_residual)


def run_lattice(cfg: RunConfig) -> dict:
    betas = cfg.beta_grid.betas()
    rng = RngStream(cfg.seed)
    met = _metropolis_config(cfg)
    st = cfg.statistics

    def one(i):
        lt = LatticeThermoConfig(
            beta=float(betas[i]), n_configs=st.n_configs,
            a_t_energy=st.a_t_energy, a_t_free_energy=st.a_t_free_energy,
            a_t_specific_heat=st.a_t_specific_heat)
        return measure_beta_point(cfg.model, cfg.lattice.n_sites, lt, met,
                                  rng.child(_STREAM_LATTICE, i),
                                  a_s=cfg.lattice.a_s)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            points = list(pool.map(one, range(len(betas))))
    else:
        points = [one(i) for i in range(len(betas))]

    out = _OutputSet(cfg.output_dir)
    path = out.write("thermo_lagrangian.txt",
                     lambda p: thermo_mod.save_thermo_table(
                         p, points, header_stamp(cfg)))
    return {"thermo": path}


_COMPARE_OBSERVABLES = (("F", "f", "f_err"), ("U", "u", "u_err"),
                        ("S", "s", "s_err"), ("C", "c", "c_err"))


def run_compare(cfg: RunConfig, path_a, path_b) -> dict:
    for p in (path_a, path_b):
        if not os.path.exists(p):
            raise ConfigurationError(f"thermo table not found: {p}")
    table_a = thermo_mod.load_thermo_table(path_a)
    table_b = thermo_mod.load_thermo_table(path_b)
    if len(table_a) != len(table_b) or any(
            abs(a.beta - b.beta) > 1e-9 * max(1.0, abs(a.beta))
            for a, b in zip(table_a, table_b)):
        raise ConfigurationError("the two tables do not share a beta grid")

    rows = []
    counts = {">2": 0, ">3": 0, "total": 0}
    for a, b in zip(table_a, table_b):
        for name, attr, err_attr in _COMPARE_OBSERVABLES:
            va, ea = getattr(a, attr), getattr(a, err_attr)
            vb, eb = getattr(b, attr), getattr(b, err_attr)
            diff = vb - va
            err = float(np.hypot(ea, eb))
            z = 0.0 if diff == 0.0 else (np.inf if err == 0.0 else diff / err)
            rows.append((a.beta, name, va, vb, diff, err, z))
            counts["total"] += 1
            counts[">2"] += abs(z) > 2
            counts[">3"] += abs(z) > 3

    out = _OutputSet(cfg.output_dir)
    stamp = header_stamp(cfg) + [f"table_a = {os.path.basename(path_a)}",
                                 f"table_b = {os.path.basename(path_b)}"]

    def write_report(p):
        with open(p, "w") as fh:
            for line in stamp:
                fh.write(f"# {line}\n")
            fh.write("# columns: beta observable value_a value_b diff "
                     "combined_err z\n")
            for beta, name, va, vb, diff, err, z in rows:
                fh.write(f"{beta:.17g} {name} {va:.17g} {vb:.17g} "
                         f"{diff:.17g} {err:.17g} {z:.17g}\n")
            fh.write(f"# summary: {counts['total']} comparisons, "
                     f"{counts['>2']} with |z| > 2, {counts['>3']} with |z| > 3\n")

    def write_overlay(p):
        with open(p, "w") as fh:
            for line in stamp:
                fh.write(f"# {line}\n")
            cols = " ".join(f"{n}_a {n}_a_err {n}_b {n}_b_err"
                            for n, _, _ in _COMPARE_OBSERVABLES)
            fh.write(f"# columns: beta {cols}\n")
            for a, b in zip(table_a, table_b):
                vals = [a.beta]
                for _, attr, err_attr in _COMPARE_OBSERVABLES:
                    vals += [getattr(a, attr), getattr(a, err_attr),
                             getattr(b, attr), getattr(b, err_attr)]
                fh.write(" ".join(f"{v:.17g}" for v in vals) + "\n")

    paths = {"report": out.write("compare_report.txt", write_report),
             "overlay": out.write("compare_overlay.txt", write_overlay)}
    log.info("compare: %d comparisons, %d beyond 2 sigma, %d beyond 3 sigma",
             counts["total"], counts[">2"], counts[">3"])
    return paths


def run_oracle(cfg: RunConfig, n_levels: int = 16) -> dict:
    from .oracle import GridSpec, grid_spectrum

    grid = GridSpec(cfg.basis.n_nodes, cfg.basis.x_min, cfg.basis.x_max,
                    dimension=cfg.lattice.n_sites)
    energies, _ = grid_spectrum(cfg.model, grid, n_levels=n_levels)
    out = _OutputSet(cfg.output_dir)

    def write(p):
        with open(p, "w") as fh:
            for line in header_stamp(cfg):
                fh.write(f"# {line}\n")
            fh.write(f"# dense grid diagonalization, {grid.points_per_dim} "
                     f"points per dimension on [{grid.x_min:g}, {grid.x_max:g}]\n")
            fh.write("# columns: k E_eff error\n")
            for k, e in enumerate(energies):
                fh.write(f"{k + 1} {e:.17g} 0\n")

    return {"spectrum": out.write("spectrum_oracle.txt", write)}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="effham",
        description="effective-Hamiltonian spectra and thermodynamics for the "
                    "coupled anharmonic oscillator chain")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, extra in (
            ("spectrum", ()),
            ("thermo", ("--spectrum",)),
            ("lattice", ()),
            ("compare", ("--table-a", "--table-b")),
            ("oracle", ())):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="run configuration file")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--workers", type=int, help="override worker count")
        sp.add_argument("--out", help="override output directory")
        for flag in extra:
            sp.add_argument(flag, required=True)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.pipeline != args.command:
            raise ConfigurationError(
                f"config pipeline is {cfg.pipeline!r} but the {args.command} "
                "command was invoked")
        if args.seed is not None:
            cfg.seed = args.seed
        if args.workers is not None:
            cfg.workers = args.workers
        if args.out is not None:
            cfg.output_dir = args.out
        from .config import validate_config
        validate_config(cfg)

        if args.command == "spectrum":
            run_spectrum(cfg)
        elif args.command == "thermo":
            run_thermo(cfg, args.spectrum)
        elif args.command == "lattice":
            run_lattice(cfg)
        elif args.command == "compare":
            run_compare(cfg, args.table_a, args.table_b)
        else:
            run_oracle(cfg)
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except SamplingError as exc:
        log.error("sampling failure: %s", exc)
        return 3
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
