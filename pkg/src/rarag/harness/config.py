"""Experiment configuration: dataclass, validation and the flat config file.

The file format is INI-style with a single ``[experiment]`` section, one
``key = value`` per line, ``#`` comments, and comma-separated lists. Keys map
one to one onto :class:`ExperimentConfig` fields.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from ..errors import ConfigError
from ..estimation import EstimationSettings
from ..simulation import WorldSpec, list_presets, load_preset
from ..types import CostModel, NoiseModel, PriorSpec, SourceProfile

METHODS = ("RA_RAG", "MV", "ORACLE_WMV", "KAPPA_RSS", "RA_RAG_NO_FILTER", "RA_RAG_FULL")
DEFAULT_KAPPA = 4
DEFAULT_TAU = 0.1
SECTION = "experiment"


@dataclass(frozen=True)
class ExperimentConfig:
    # world
    prior: str = "beta"  # beta | adversary_hammer | explicit
    w_bar: float = 0.6
    coverage_r: float = 0.6
    n_adversaries: int = 0
    adversary_coverage: float | None = None
    reliabilities: tuple = ()  # explicit prior only
    coverages: tuple = ()  # explicit prior only; empty means coverage_r for all
    n_sources: tuple = (9,)
    noise: str = "exact"  # "exact" or a preset name such as llama3-tqa
    n_paraphrases: int = 9
    # inference
    methods: tuple = ("RA_RAG", "MV", "ORACLE_WMV")
    kappa: int | None = None
    tau: float | None = None
    # estimation
    eta_max: int = 25
    eps_conv: float = 1e-6
    scale: float | None = None
    # protocol
    n_trials: int = 10
    m_est: int = 200
    m_test: int = 1400
    seed: int = 0
    # cost model
    tokens_per_call: float = CostModel().tokens_per_call
    price_per_token: float = CostModel().price_per_token
    # execution and output
    workers: int = 1
    record_probes: bool = False
    out: str | None = None

    @property
    def n_queries(self) -> int:
        return self.m_est + self.m_test

    def estimation_settings(self) -> EstimationSettings:
        return EstimationSettings(eta_max=self.eta_max, eps_conv=self.eps_conv, scale=self.scale)

    def cost_model(self) -> CostModel:
        return CostModel(self.tokens_per_call, self.price_per_token)

    def prior_spec(self, n: int) -> PriorSpec:
        if self.prior == "beta":
            return PriorSpec.beta(self.w_bar, self.coverage_r)
        if self.prior == "adversary_hammer":
            return PriorSpec.adversary_hammer(self.n_adversaries, n, self.coverage_r, self.adversary_coverage)
        covs = self.coverages or (self.coverage_r,) * len(self.reliabilities)
        return PriorSpec.explicit([SourceProfile(i, p, r) for i, (p, r) in enumerate(zip(self.reliabilities, covs))])

    def noise_model(self) -> NoiseModel:
        if self.noise == "exact":
            return NoiseModel.exact()
        return load_preset(self.noise, self.tau if self.tau is not None else DEFAULT_TAU)

    def world_spec(self, n: int, seed: int) -> WorldSpec:
        return WorldSpec(self.n_queries, n, self.prior_spec(n), self.noise_model(), self.n_paraphrases, seed)


def _unit(name: str, x) -> None:
    if x is None or not (0.0 <= x <= 1.0):
        raise ConfigError(f"{name}={x!r} outside [0, 1]")


def validate(config: ExperimentConfig) -> ExperimentConfig:
    """Check every field and fill defaults (``kappa=4``, ``tau=0.1``).

    ``scale=None`` stays as is and means "the number of sources" at run time.
    """
    c = config
    kappa = DEFAULT_KAPPA if c.kappa is None else c.kappa
    tau = DEFAULT_TAU if c.tau is None else c.tau
    if not (isinstance(kappa, int) and kappa >= 1):
        raise ConfigError(f"kappa must be an integer >= 1, got {kappa!r}")
    _unit("tau", tau)
    _unit("coverage_r", c.coverage_r)
    if c.adversary_coverage is not None:
        _unit("adversary_coverage", c.adversary_coverage)
    if not c.n_sources or any(not isinstance(n, int) or n < 2 for n in c.n_sources):
        raise ConfigError(f"n_sources must be a nonempty list of integers >= 2, got {c.n_sources!r}")
    if c.prior == "beta":
        if not (0.0 < c.w_bar < 1.0):
            raise ConfigError(f"w_bar must be in (0, 1), got {c.w_bar!r}")
    elif c.prior == "adversary_hammer":
        if c.n_adversaries < 0 or any(c.n_adversaries > n for n in c.n_sources):
            raise ConfigError(
                f"n_adversaries={c.n_adversaries} must be in [0, n_sources]", "REJECT_ADVERSARIES"
            )
    elif c.prior == "explicit":
        if not c.reliabilities:
            raise ConfigError("explicit prior needs reliabilities")
        for p in c.reliabilities:
            _unit("p", p)
        for r in c.coverages:
            _unit("r", r)
        if c.coverages and len(c.coverages) != len(c.reliabilities):
            raise ConfigError("coverages and reliabilities differ in length")
        if tuple(c.n_sources) != (len(c.reliabilities),):
            raise ConfigError("explicit prior fixes n_sources to the number of reliabilities")
    else:
        raise ConfigError(f"unknown prior {c.prior!r}", "UNKNOWN_PRIOR")
    if not c.methods:
        raise ConfigError("methods must be nonempty")
    for m in c.methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {', '.join(METHODS)}", "UNKNOWN_METHOD")
    if c.noise != "exact" and (c.noise.lower(), tau) not in list_presets():
        raise ConfigError(f"no noise preset {c.noise!r} at tau={tau:g}", "UNKNOWN_PRESET")
    if c.n_trials < 1:
        raise ConfigError(f"n_trials must be positive, got {c.n_trials}")
    if c.m_est < 1 or c.m_test < 1:
        raise ConfigError("m_est and m_test must both be positive")
    if c.n_paraphrases < 1:
        raise ConfigError("n_paraphrases must be >= 1")
    if not 0 <= c.seed < 2**64:
        raise ConfigError(f"seed must fit in 64 unsigned bits, got {c.seed}")
    if c.workers < 1:
        raise ConfigError("workers must be >= 1")
    CostModel(c.tokens_per_call, c.price_per_token)
    EstimationSettings(eta_max=c.eta_max, eps_conv=c.eps_conv, scale=c.scale)
    return dataclasses.replace(c, kappa=kappa, tau=tau, methods=tuple(c.methods), n_sources=tuple(c.n_sources))


# ---------------------------------------------------------------- file format

_TUPLE_TYPES = {"reliabilities": float, "coverages": float, "n_sources": int, "methods": str}


def _field_types() -> dict[str, str]:
    return {f.name: str(f.type) for f in fields(ExperimentConfig)}


def _convert(key: str, text: str, ftype: str):
    text = text.strip()
    if key in _TUPLE_TYPES:
        conv = _TUPLE_TYPES[key]
        items = [t.strip() for t in text.split(",") if t.strip()]
        return tuple(conv(t.upper() if key == "methods" else t) for t in items)
    optional = "None" in ftype
    if optional and text.lower() in ("", "none", "auto"):
        return None
    if ftype.startswith("bool"):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if ftype.startswith("int"):
        return int(text, 0)
    if ftype.startswith("float"):
        return float(text)
    return text


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}", "CONFIG_SYNTAX") from None
    if not parser.has_section(SECTION) or len(parser.sections()) != 1:
        raise ConfigError(f"{source}: expected exactly one [{SECTION}] section", "CONFIG_SYNTAX")
    types = _field_types()
    values = {}
    for key, text_value in parser.items(SECTION):
        if key not in types:
            raise ConfigError(f"{source}: unknown key {key!r}", "UNKNOWN_KEY")
        try:
            values[key] = _convert(key, text_value, types[key])
        except ValueError as exc:
            raise ConfigError(f"{source}: bad value for {key}: {exc}", "CONFIG_SYNTAX") from None
    return ExperimentConfig(**values)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", "CONFIG_IO") from None
    return parse_config(text, str(path))


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_items(config: ExperimentConfig) -> dict[str, object]:
    """Field values in declaration order, ready for a JSON echo."""
    out = {}
    for f in fields(config):
        v = getattr(config, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def dump_config(config: ExperimentConfig) -> str:
    lines = [f"[{SECTION}]"]
    for f in fields(config):
        lines.append(f"{f.name} = {_format(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(dump_config(config), encoding="utf-8")
