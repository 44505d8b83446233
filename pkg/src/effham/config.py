"""Run configuration: flat key=value files with dotted section prefixes.

Example::

    pipeline = spectrum
    model.omega = 1
    model.omega0 = 2
    model.lambda = 1
    lattice.n_sites = 9
    lattice.a_t = 0.033333333333333333
    lattice.n_time = 60
    basis.flavor = stochastic
    basis.n_stoch = 100
    statistics.n_bridges = 300
    seed = 20240901

Unknown keys are rejected.  Every output file starts with a header that
embeds the effective configuration ("# cfg key = value" lines); parsing
that header reproduces the RunConfig exactly.  Two execution-only knobs,
workers and output_dir, never influence results and are excluded from
the stamp so reruns with different parallelism stay byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigurationError
from .lattice_thermo import A_T_ENERGY, A_T_FREE_ENERGY, A_T_SPECIFIC_HEAT
from .model import BOUNDARIES, LatticeParams, ModelParams

PIPELINES = ("spectrum", "thermo", "lattice", "compare", "oracle")


@dataclass
class BasisConfig:
    flavor: str = "stochastic"
    n_stoch: int = 100
    n_nodes: int = 40
    x_min: float = -5.0
    x_max: float = 5.0
    density: str = "kde"   # kde | free


@dataclass
class StatisticsConfig:
    n_bridges: int = 300
    n_configs: int = 2000
    thermalization: int = 1000
    decorrelation: int = 10
    a_t_energy: float = A_T_ENERGY
    a_t_free_energy: float = A_T_FREE_ENERGY
    a_t_specific_heat: float = A_T_SPECIFIC_HEAT


@dataclass
class BetaGridConfig:
    beta_min: float = 1.0
    beta_max: float = 10.0
    count: int = 19
    spacing: str = "linear"  # linear | log

    def betas(self):
        import numpy as np
        if self.count == 1:
            return np.array([self.beta_min])
        if self.spacing == "linear":
            return np.linspace(self.beta_min, self.beta_max, self.count)
        return np.geomspace(self.beta_min, self.beta_max, self.count)


@dataclass
class RunConfig:
    pipeline: str = "spectrum"
    model: ModelParams = field(default_factory=ModelParams)
    lattice: LatticeParams = field(
        default_factory=lambda: LatticeParams(n_sites=9, n_time=60, a_t=1.0 / 30.0))
    basis: BasisConfig = field(default_factory=BasisConfig)
    statistics: StatisticsConfig = field(default_factory=StatisticsConfig)
    beta_grid: BetaGridConfig = field(default_factory=BetaGridConfig)
    seed: int = 1
    workers: int = 1
    output_dir: str = "."


# (section, key) -> (attribute, type); "lambda" is the config spelling of lam
_MODEL_KEYS = {"omega": float, "omega0": float, "lambda": float, "mass": float,
               "hbar": float, "kb": float, "boundary": str}
_LATTICE_KEYS = {"n_sites": int, "n_time": int, "a_s": float, "a_t": float,
                 "total_time": float}
_BASIS_KEYS = {"flavor": str, "n_stoch": int, "n_nodes": int, "x_min": float,
               "x_max": float, "density": str}
_STATS_KEYS = {"n_bridges": int, "n_configs": int, "thermalization": int,
               "decorrelation": int, "a_t_energy": float, "a_t_free_energy": float,
               "a_t_specific_heat": float}
_BETA_KEYS = {"min": float, "max": float, "count": int, "spacing": str}
_TOP_KEYS = {"pipeline": str, "seed": int, "workers": int, "output_dir": str}


def _parse_value(raw: str, typ, key: str):
    try:
        if typ is int:
            v = int(raw)
        elif typ is float:
            v = float(raw)
        else:
            v = raw
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse {key} = {raw!r} as {typ.__name__}") from exc
    return v


def parse_config(text: str) -> RunConfig:
    """Parse flat key=value text into a validated RunConfig."""
    seen = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in seen:
            raise ConfigurationError(f"line {lineno}: duplicate key {key}")
        seen[key] = raw

    sections = {"model": {}, "lattice": {}, "basis": {}, "statistics": {},
                "beta_grid": {}, "": {}}
    tables = {"model": _MODEL_KEYS, "lattice": _LATTICE_KEYS, "basis": _BASIS_KEYS,
              "statistics": _STATS_KEYS, "beta_grid": _BETA_KEYS, "": _TOP_KEYS}
    for key, raw in seen.items():
        section, _, name = key.partition(".")
        if not name:
            section, name = "", key
        if section not in tables or name not in tables[section]:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        sections[section][name] = _parse_value(raw, tables[section][name], key)

    model_kw = dict(sections["model"])
    if "lambda" in model_kw:
        model_kw["lam"] = model_kw.pop("lambda")
    model = ModelParams(**model_kw)

    lat = dict(sections["lattice"])
    total = lat.pop("total_time", None)
    if total is not None:
        if "n_time" in lat and "a_t" in lat:
            if abs(lat["n_time"] * lat["a_t"] - total) > 1e-9 * total:
                raise ConfigurationError(
                    "lattice.total_time inconsistent with n_time * a_t")
        elif "a_t" in lat:
            n_time = round(total / lat["a_t"])
            if abs(n_time * lat["a_t"] - total) > 1e-9 * total:
                raise ConfigurationError(
                    "lattice.total_time is not an integer multiple of a_t")
            lat["n_time"] = n_time
        elif "n_time" in lat:
            lat["a_t"] = total / lat["n_time"]
        else:
            raise ConfigurationError(
                "lattice.total_time needs n_time or a_t alongside it")
    defaults = RunConfig().lattice
    lat.setdefault("n_sites", defaults.n_sites)
    lat.setdefault("n_time", defaults.n_time)
    lat.setdefault("a_t", defaults.a_t)
    lattice = LatticeParams(**lat)

    top = sections[""]
    cfg = RunConfig(
        pipeline=top.get("pipeline", "spectrum"),
        model=model,
        lattice=lattice,
        basis=BasisConfig(**sections["basis"]),
        statistics=StatisticsConfig(**sections["statistics"]),
        beta_grid=BetaGridConfig(**{
            {"min": "beta_min", "max": "beta_max"}.get(k, k): v
            for k, v in sections["beta_grid"].items()}),
        seed=top.get("seed", 1),
        workers=top.get("workers", 1),
        output_dir=top.get("output_dir", "."),
    )
    validate_config(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc


def validate_config(cfg: RunConfig):
    if cfg.pipeline not in PIPELINES:
        raise ConfigurationError(
            f"pipeline must be one of {PIPELINES}, got {cfg.pipeline!r}")
    if cfg.basis.flavor not in ("regular", "stochastic"):
        raise ConfigurationError(f"basis.flavor must be regular or stochastic")
    if cfg.basis.density not in ("kde", "free"):
        raise ConfigurationError("basis.density must be kde or free")
    if cfg.basis.flavor == "regular":
        if cfg.lattice.n_sites != 1:
            raise ConfigurationError(
                "regular bases are 1-D only; use a stochastic basis for chains")
        if cfg.basis.x_max <= cfg.basis.x_min or cfg.basis.n_nodes < 2:
            raise ConfigurationError("regular basis needs n_nodes >= 2 and x_max > x_min")
    elif cfg.basis.n_stoch < 1:
        raise ConfigurationError("basis.n_stoch must be >= 1")
    st = cfg.statistics
    if min(st.n_bridges, st.n_configs) < 2 or st.thermalization < 0 \
            or st.decorrelation < 1:
        raise ConfigurationError("invalid statistics block")
    for name in ("a_t_energy", "a_t_free_energy", "a_t_specific_heat"):
        if getattr(st, name) <= 0:
            raise ConfigurationError(f"statistics.{name} must be > 0")
    bg = cfg.beta_grid
    if bg.beta_min <= 0 or bg.beta_max < bg.beta_min or bg.count < 1:
        raise ConfigurationError("invalid beta_grid block")
    if bg.spacing not in ("linear", "log"):
        raise ConfigurationError("beta_grid.spacing must be linear or log")
    if cfg.seed < 0 or cfg.workers < 1:
        raise ConfigurationError("seed must be >= 0 and workers >= 1")
    if cfg.pipeline == "oracle" and cfg.lattice.n_sites > 2:
        raise ConfigurationError(
            "the grid oracle is dense and supports n_sites <= 2 only")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def config_lines(cfg: RunConfig) -> list[str]:
    """Canonical key=value lines (excluding workers and output_dir)."""
    m, l, b, s, g = cfg.model, cfg.lattice, cfg.basis, cfg.statistics, cfg.beta_grid
    items = [
        ("pipeline", cfg.pipeline),
        ("model.omega", m.omega), ("model.omega0", m.omega0),
        ("model.lambda", m.lam), ("model.mass", m.mass),
        ("model.hbar", m.hbar), ("model.kb", m.kb),
        ("model.boundary", m.boundary),
        ("lattice.n_sites", l.n_sites), ("lattice.n_time", l.n_time),
        ("lattice.a_t", l.a_t), ("lattice.a_s", l.a_s),
        ("basis.flavor", b.flavor), ("basis.n_stoch", b.n_stoch),
        ("basis.n_nodes", b.n_nodes), ("basis.x_min", b.x_min),
        ("basis.x_max", b.x_max), ("basis.density", b.density),
        ("statistics.n_bridges", s.n_bridges), ("statistics.n_configs", s.n_configs),
        ("statistics.thermalization", s.thermalization),
        ("statistics.decorrelation", s.decorrelation),
        ("statistics.a_t_energy", s.a_t_energy),
        ("statistics.a_t_free_energy", s.a_t_free_energy),
        ("statistics.a_t_specific_heat", s.a_t_specific_heat),
        ("beta_grid.min", g.beta_min), ("beta_grid.max", g.beta_max),
        ("beta_grid.count", g.count), ("beta_grid.spacing", g.spacing),
        ("seed", cfg.seed),
    ]
    return [f"{key} = {_fmt(value)}" for key, value in items]


def header_stamp(cfg: RunConfig) -> list[str]:
    """Header comment block embedding the full effective configuration."""
    return ["effham run", *(f"cfg {line}" for line in config_lines(cfg))]


def parse_header_config(path) -> RunConfig:
    """Recover the RunConfig from an output file's header stamp."""
    lines = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# cfg "):
                lines.append(line[len("# cfg "):].rstrip("\n"))
    if not lines:
        raise ConfigurationError(f"no config stamp found in {path}")
    return parse_config("\n".join(lines))
