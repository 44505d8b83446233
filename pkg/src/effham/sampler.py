"""Stochastic path generation.

Three samplers drive everything downstream:

* exact Brownian-bridge draws of free-action paths with both endpoints
  fixed (the ratio estimator for transition amplitudes),
* Metropolis chains pinned at the origin with a free endpoint, whose
  recorded endpoints feed the stochastic-basis construction,
* Metropolis chains on time-periodic lattices (thermal ensembles for
  the Lagrangian estimators).

Reproducibility contract: every task derives its own RngStream from
(master_seed, stream path), so results are bit-identical for a given
master seed regardless of how tasks are scheduled across workers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .model import FieldPath, LatticeParams, ModelParams, potential_action_batch
from .stats import EnsembleStats, RunningMoments

log = logging.getLogger(__name__)

# chunk sizes: fixed so the draw order never depends on scheduling
_BRIDGE_CHUNK_VALUES = 4_000_000
_SWEEP_CHUNK = 250
_TUNE_FACTOR_BOUNDS = (0.5, 2.0)
_ACCEPTANCE_HEALTHY = (0.2, 0.8)


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream addressed by (master_seed, stream path).

    child(*key) derives an independent substream; generator() yields a
    numpy Generator whose draws depend only on the seed and the path of
    integer keys, never on call order elsewhere in the program.
    """

    master_seed: int
    stream_path: tuple = ()

    def child(self, *key: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_path + tuple(int(k) for k in key))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=self.stream_path
        )
        return np.random.default_rng(ss)


@dataclass
class MetropolisConfig:
    """Proposal/thermalization settings for both Metropolis samplers.

    The Gaussian proposal width is auto-tuned toward target_acceptance
    during thermalization (in chunks of tune_interval sweeps) and then
    frozen, so the recorded phase satisfies detailed balance exactly.
    """

    step: float = 0.5
    thermalization: int = 1000
    decorrelation: int = 10
    tune: bool = True
    target_acceptance: float = 0.5
    tune_interval: int = 100


@dataclass
class EndpointEnsemble:
    endpoints: np.ndarray  # (n_paths, n_sites)
    acceptance_rate: float
    step: float
    lp: LatticeParams
    mp: ModelParams


@dataclass
class LatticeEnsemble:
    configs: np.ndarray  # (n_configs, n_time, n_sites)
    acceptance_rate: float
    step: float
    lp: LatticeParams
    mp: ModelParams


def sample_bridges(start, end, n_bridges, lp: LatticeParams, mp: ModelParams,
                   rng: np.random.Generator):
    """Draw n_bridges exact free-action bridges, shape (n_bridges, N_t+1, N_s).

    Construction: cumulative Gaussian increments of variance hbar a_t / m,
    then the bridge correction W_k - (k/N_t) W_{N_t} plus the linear
    endpoint interpolation.  This is the exact conditional law of the
    discretized kinetic action given both endpoints.
    """
    start = np.broadcast_to(np.asarray(start, dtype=float), (lp.n_sites,))
    end = np.broadcast_to(np.asarray(end, dtype=float), (lp.n_sites,))
    sigma = np.sqrt(mp.hbar * lp.a_t / mp.mass)
    steps = sigma * rng.standard_normal((n_bridges, lp.n_time, lp.n_sites))
    walk = np.empty((n_bridges, lp.n_time + 1, lp.n_sites))
    walk[:, 0, :] = 0.0
    np.cumsum(steps, axis=1, out=walk[:, 1:, :])
    frac = (np.arange(lp.n_time + 1) / lp.n_time)[None, :, None]
    return start + walk - frac * (walk[:, -1:, :] - (end - start))


def sample_brownian_bridge(start, end, lp: LatticeParams, mp: ModelParams,
                           rng: RngStream) -> FieldPath:
    """One fixed-endpoint path distributed per the discretized free action."""
    values = sample_bridges(start, end, 1, lp, mp, rng.generator())[0]
    return FieldPath(values, periodic_time=False)


def estimate_sv_factor(start, end, n_bridges: int, lp: LatticeParams,
                       mp: ModelParams, rng: RngStream) -> EnsembleStats:
    """Mean and standard error of exp(-S_V / hbar) over free-action bridges.

    This is the ratio of the interacting to the free fixed-endpoint path
    integral; it lies in (0, 1] whenever the potential action is
    nonnegative.
    """
    if n_bridges < 2:
        raise ConfigurationError("n_bridges must be >= 2")
    gen = rng.generator()
    per_bridge = (lp.n_time + 1) * lp.n_sites
    chunk = max(1, _BRIDGE_CHUNK_VALUES // per_bridge)
    acc = RunningMoments()
    done = 0
    while done < n_bridges:
        take = min(chunk, n_bridges - done)
        paths = sample_bridges(start, end, take, lp, mp, gen)
        sv = potential_action_batch(paths, False, mp, lp)
        acc.update(np.exp(-sv / mp.hbar))
        done += take
    return acc.stats()


def _run_metropolis(kernel, values, mp: ModelParams, lp: LatticeParams,
                    gen: np.random.Generator, cfg: MetropolisConfig,
                    n_records: int, rec_shape):
    """Shared driver: tune during thermalization, then record every
    cfg.decorrelation sweeps.  Returns (records, acceptance_rate, step)."""
    n_upd = values.shape[0] - (1 if kernel is kernels.sweep_fixed_start else 0)
    n_s = lp.n_sites
    spatial_periodic = mp.boundary == "periodic"
    args = (lp.a_t, mp.mass, mp.omega**2, mp.omega0**2, mp.lam, mp.hbar,
            spatial_periodic)
    step = cfg.step
    no_rec = np.empty((0,) + rec_shape[1:])

    done = 0
    while done < cfg.thermalization:
        n = min(cfg.tune_interval, cfg.thermalization - done)
        normals = gen.standard_normal((n, n_upd, n_s))
        uniforms = gen.random((n, n_upd, n_s))
        acc = kernel(values, *args, step, normals, uniforms, 0, no_rec)
        rate = acc / (n * n_upd * n_s)
        if cfg.tune:
            step *= float(np.clip(rate / cfg.target_acceptance, *_TUNE_FACTOR_BOUNDS))
            step = float(np.clip(step, 1e-6, 1e6))
        done += n

    records = np.empty(rec_shape)
    accepted = 0
    recorded = 0
    sweeps = 0
    while recorded < n_records:
        take = min(_SWEEP_CHUNK, n_records - recorded)
        n = take * cfg.decorrelation
        normals = gen.standard_normal((n, n_upd, n_s))
        uniforms = gen.random((n, n_upd, n_s))
        accepted += kernel(values, *args, step, normals, uniforms,
                           cfg.decorrelation, records[recorded:recorded + take])
        recorded += take
        sweeps += n
    rate = accepted / (sweeps * n_upd * n_s)
    if not _ACCEPTANCE_HEALTHY[0] <= rate <= _ACCEPTANCE_HEALTHY[1]:
        log.warning(
            "Metropolis acceptance rate %.3f outside healthy range %s "
            "(step=%.4g); results remain valid but decorrelate slowly",
            rate, _ACCEPTANCE_HEALTHY, step,
        )
    return records, float(rate), float(step)


def sample_endpoint_ensemble(n_paths: int, lp: LatticeParams, mp: ModelParams,
                             rng: RngStream, cfg: MetropolisConfig | None = None,
                             origin=None) -> EndpointEnsemble:
    """Endpoints of full-action paths pinned to the origin at t = 0.

    The chain updates slices 1..N_t (the endpoint slice is dynamical) with
    the full action as weight; the recorded t = T slice values are thus
    distributed as the normalized transition kernel from the origin.
    """
    if n_paths < 1:
        raise ConfigurationError("n_paths must be >= 1")
    cfg = cfg or MetropolisConfig()
    values = np.zeros((lp.n_time + 1, lp.n_sites))
    if origin is not None:
        values[0] = np.broadcast_to(np.asarray(origin, dtype=float), (lp.n_sites,))
        values[:] = values[0]
    records, rate, step = _run_metropolis(
        kernels.sweep_fixed_start, values, mp, lp, rng.generator(), cfg,
        n_paths, (n_paths, lp.n_sites))
    log.info("endpoint ensemble: %d paths, acceptance %.3f, step %.4g",
             n_paths, rate, step)
    return EndpointEnsemble(records, rate, step, lp, mp)


def sample_periodic_lattice(n_configs: int, lp: LatticeParams, mp: ModelParams,
                            rng: RngStream,
                            cfg: MetropolisConfig | None = None) -> LatticeEnsemble:
    """Thermal ensemble of time-periodic configurations weighted by exp(-S/hbar)."""
    if n_configs < 2:
        raise ConfigurationError("n_configs must be >= 2")
    cfg = cfg or MetropolisConfig()
    nbytes = 8 * n_configs * lp.n_time * lp.n_sites
    if nbytes > 4 << 30:
        raise ConfigurationError(
            f"requested ensemble would need {nbytes / 2**30:.1f} GiB; "
            "reduce n_configs or thin with a larger decorrelation"
        )
    values = np.zeros((lp.n_time, lp.n_sites))
    records, rate, step = _run_metropolis(
        kernels.sweep_periodic, values, mp, lp, rng.generator(), cfg,
        n_configs, (n_configs, lp.n_time, lp.n_sites))
    log.info("periodic lattice: %d configs (N_t=%d, N_s=%d), acceptance %.3f",
             n_configs, lp.n_time, lp.n_sites, rate)
    return LatticeEnsemble(records, rate, step, lp, mp)
