"""Basis construction: regular 1-D grids and stochastic node sets.

A stochastic basis is built from the endpoint ensemble of pinned-start
Metropolis paths: nodes are a uniform subsample of the endpoints, the
endpoint density P is estimated at each node, and every node receives
the importance-sampling cell volume

    weight_i = 1 / (n_nodes * P(x_i)),

which makes sum_i weight_i * P(x_i) = 1 an exact identity and turns
sums over nodes into Monte Carlo quadrature in any dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SamplingError
from .freekernel import FreeKernelParams, gaussian_endpoint_sigma

_DEDUP_SCALE = 1e-6
_KDE_QUERY_CHUNK = 64


@dataclass(frozen=True)
class BasisNode:
    position: np.ndarray
    weight: float
    density: float


@dataclass
class Basis:
    """Ordered node set with per-node volume weights.

    flavor is "regular" (equispaced 1-D, equal weights) or "stochastic".
    """

    positions: np.ndarray  # (n_nodes, dimension)
    weights: np.ndarray    # (n_nodes,)
    densities: np.ndarray  # (n_nodes,)
    flavor: str
    dimension: int

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        self.densities = np.asarray(self.densities, dtype=float)
        if len(self) < 1:
            raise ConfigurationError("basis needs at least one node")
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise ConfigurationError("every node weight must be positive and finite")

    def __len__(self) -> int:
        return self.positions.shape[0]

    def node(self, i: int) -> BasisNode:
        return BasisNode(self.positions[i], float(self.weights[i]),
                         float(self.densities[i]))


def build_regular_basis(n_nodes: int, x_min: float, x_max: float) -> Basis:
    """Equispaced 1-D box basis with the centered-cell convention."""
    if n_nodes < 2:
        raise ConfigurationError(f"regular basis needs n_nodes >= 2, got {n_nodes}")
    if x_max <= x_min:
        raise ConfigurationError(f"need x_max > x_min, got [{x_min}, {x_max}]")
    dx = (x_max - x_min) / n_nodes
    centers = x_min + dx * (np.arange(n_nodes) + 0.5)
    weights = np.full(n_nodes, dx)
    densities = np.full(n_nodes, 1.0 / (n_nodes * dx))
    return Basis(centers[:, None], weights, densities, "regular", 1)


def _silverman_bandwidths(endpoints: np.ndarray) -> np.ndarray:
    n = endpoints.shape[0]
    sigma = endpoints.std(axis=0, ddof=1)
    h = 1.06 * sigma * n ** (-0.2)
    # degenerate coordinates: keep the KDE strictly positive
    h[h == 0.0] = 1e-3
    return h


def estimate_density(endpoints, query):
    """Product-Gaussian kernel density estimate at one or many query points.

    Bandwidth per coordinate d is the Silverman rule 1.06 sigma_d n^(-1/5).
    Returns a float for a single query point, else an array of densities.
    """
    endpoints = np.atleast_2d(np.asarray(endpoints, dtype=float))
    n, dim = endpoints.shape
    if n < 10:
        raise ConfigurationError(f"need at least 10 endpoints for a KDE, got {n}")
    query = np.asarray(query, dtype=float)
    single = query.ndim == 1
    q = np.atleast_2d(query)
    if q.shape[1] != dim:
        raise ConfigurationError(
            f"query dimension {q.shape[1]} does not match ensemble dimension {dim}")
    h = _silverman_bandwidths(endpoints)
    log_norm = np.sum(np.log(np.sqrt(2.0 * np.pi) * h))
    out = np.empty(q.shape[0])
    for lo in range(0, q.shape[0], _KDE_QUERY_CHUNK):
        block = q[lo:lo + _KDE_QUERY_CHUNK]
        z = (block[:, None, :] - endpoints[None, :, :]) / h
        logk = -0.5 * np.sum(z * z, axis=2) - log_norm
        out[lo:lo + _KDE_QUERY_CHUNK] = np.exp(logk).mean(axis=1)
    return float(out[0]) if single else out


def free_endpoint_density(points, fp: FreeKernelParams):
    """Closed-form endpoint density of the free theory (per-site Gaussian)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    sigma = gaussian_endpoint_sigma(fp)
    logp = -0.5 * np.sum(pts**2, axis=1) / sigma**2 \
        - pts.shape[1] * np.log(np.sqrt(2.0 * np.pi) * sigma)
    return np.exp(logp)


def build_stochastic_basis(endpoints, n_stoch: int, rng,
                           density_mode: str = "kde",
                           free_params: FreeKernelParams | None = None) -> Basis:
    """Select n_stoch nodes from an endpoint ensemble and assign weights.

    Nodes are a uniform subsample without replacement (the endpoints are
    already P-distributed, so no reweighting is applied at selection).
    Near-coincident candidates (within 1e-6 sigma per coordinate) are
    merged, since coincident box states make the transition matrix
    singular.  Densities come from a KDE over the FULL ensemble, or from
    the free closed form when density_mode = "free".
    """
    endpoints = np.atleast_2d(np.asarray(endpoints, dtype=float))
    n, dim = endpoints.shape
    if n < n_stoch:
        raise SamplingError(
            f"ensemble of {n} endpoints cannot supply {n_stoch} basis nodes")
    gen = rng.generator() if hasattr(rng, "generator") else rng
    order = gen.permutation(n)
    tol = _DEDUP_SCALE * endpoints.std(axis=0, ddof=1)
    tol[tol == 0.0] = _DEDUP_SCALE
    chosen: list[int] = []
    for idx in order:
        cand = endpoints[idx]
        if chosen:
            close = np.all(np.abs(endpoints[chosen] - cand) < tol, axis=1)
            if np.any(close):
                continue
        chosen.append(int(idx))
        if len(chosen) == n_stoch:
            break
    if len(chosen) < n_stoch:
        raise SamplingError(
            f"only {len(chosen)} distinct endpoints after merging near-coincident "
            f"nodes; {n_stoch - len(chosen)} more needed. Enlarge the ensemble.")
    nodes = endpoints[chosen]
    if density_mode == "kde":
        densities = estimate_density(endpoints, nodes)
    elif density_mode == "free":
        if free_params is None:
            raise ConfigurationError("density_mode='free' requires free_params")
        densities = free_endpoint_density(nodes, free_params)
    else:
        raise ConfigurationError(f"unknown density_mode {density_mode!r}")
    densities = np.asarray(densities, dtype=float)
    if np.any(densities <= 0):
        raise SamplingError("estimated density vanished at a selected node")
    weights = 1.0 / (n_stoch * densities)
    return Basis(nodes, weights, densities, "stochastic", dim)


def save_basis(path, basis: Basis, header_lines=()):
    """Text serialization: one row per node, full precision."""
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# basis flavor={basis.flavor} dimension={basis.dimension} "
                 f"n_nodes={len(basis)}\n")
        cols = " ".join(f"x_{d + 1}" for d in range(basis.dimension))
        fh.write(f"# columns: index {cols} density weight\n")
        for i in range(len(basis)):
            coords = " ".join(f"{v:.17g}" for v in basis.positions[i])
            fh.write(f"{i} {coords} {basis.densities[i]:.17g} "
                     f"{basis.weights[i]:.17g}\n")


def load_basis(path) -> Basis:
    flavor = "stochastic"
    dim = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "basis flavor=" in line:
                    parts = dict(p.split("=") for p in line[1:].split() if "=" in p)
                    flavor = parts.get("flavor", flavor)
                    dim = int(parts["dimension"]) if "dimension" in parts else dim
                continue
            rows.append([float(v) for v in line.split()])
    if not rows:
        raise ConfigurationError(f"no basis rows found in {path}")
    data = np.asarray(rows)
    dim = dim if dim is not None else data.shape[1] - 3
    return Basis(data[:, 1:1 + dim], data[:, -1], data[:, -2], flavor, dim)
