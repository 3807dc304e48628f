"""Run configuration: an INI file with sections, plus command-line overrides.

Example::

    [run]
    input = fixture:squares32
    output = runs/demo
    seed = 0

    [noise]
    case = 3

    [problem]
    background = static
    lambda2 = 0.5

    [solver]
    max_outer = 300
    refine_iters = 20000
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .csr import CsrConfig
from .noise import NoiseSpec, case_spec
from .solver import SolverSettings


@dataclass
class NoiseConfig:
    case: Optional[int] = None
    sigma: float = 0.0
    p_s: float = 0.0
    stripe_amp: float = 0.0
    stripe_time_invariant: bool = True

    def spec(self, seed: int) -> NoiseSpec:
        if self.case is not None:
            return case_spec(self.case, seed)
        return NoiseSpec(self.sigma, self.p_s, self.stripe_amp, self.stripe_time_invariant, seed)


@dataclass
class ProblemConfig:
    background: str = "static"
    lambda2: float = 0.5
    lambda_lr: float = 1.0
    eta_f: Optional[float] = None          # None: take the fixture's hint from the manifest
    stripe_mode: str = "auto"              # auto: follow the degradation manifest
    ablation: bool = False


@dataclass
class CsrSettings:
    n_filters: Optional[int] = None        # None: fixture recommendation, else 8
    filter_size: Optional[int] = None      # None: fixture recommendation, else 9
    lambda1: float = 0.05
    init_seed: Optional[int] = None        # None: the run seed

    def resolve(self, seed: int, hint_filters: Optional[int] = None, hint_size: Optional[int] = None) -> CsrConfig:
        return CsrConfig(
            n_filters=self.n_filters or hint_filters or 8,
            filter_size=self.filter_size or hint_size or 9,
            lambda1=self.lambda1,
            init_seed=seed if self.init_seed is None else self.init_seed,
        )


@dataclass
class EvalConfig:
    threshold_frac: float = 0.1            # pseudo ground-truth map: |f| > frac * max|f|
    dump_frames: tuple = ()                # 1-based; empty: first, middle, last


@dataclass
class ExperimentConfig:
    fixtures: tuple = ()
    cases: tuple = (1, 2, 3)
    backgrounds: tuple = ("lowrank", "static")
    thresholds: dict = field(default_factory=dict)   # "min_auc_f" / "max_measure" style keys


@dataclass
class RunConfig:
    input: str = ""
    output: str = "runs/out"
    seed: int = 0
    save_coefficients: bool = False
    checkpoint: bool = False
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    csr: CsrSettings = field(default_factory=CsrSettings)
    solver: SolverSettings = field(default_factory=SolverSettings)
    evaluate: EvalConfig = field(default_factory=EvalConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)


class ConfigError(ValueError):
    pass


def _none(text):
    return text.strip().lower() in ("", "none", "auto")


def _convert(raw: str, default, name: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            if default and isinstance(default[0], int):
                return tuple(int(x) for x in items)
            return tuple(items)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


# fields whose default is None and what type they take when set
_OPTIONAL = {
    ("noise", "case"): int,
    ("problem", "eta_f"): float,
    ("csr", "n_filters"): int,
    ("csr", "filter_size"): int,
    ("csr", "init_seed"): int,
}
_TUPLE_INT = {("evaluate", "dump_frames"), ("experiment", "cases")}


def _fill(section: str, obj, items: dict):
    known = {f.name: f for f in fields(obj)}
    updates = {}
    for key, raw in items.items():
        if key not in known:
            raise ConfigError(f"unknown key [{section}] {key}")
        default = getattr(obj, key)
        if (section, key) in _OPTIONAL:
            updates[key] = None if _none(raw) else _convert(raw, _OPTIONAL[(section, key)](0), key)
        elif (section, key) in _TUPLE_INT:
            updates[key] = tuple(int(x) for x in raw.split(",") if x.strip())
        else:
            updates[key] = _convert(raw, default, key)
    return replace(obj, **updates)


def load_config(path=None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    for section in parser.sections():
        items = dict(parser.items(section))
        if section == "run":
            cfg = _fill("run", cfg, items)
        elif section == "thresholds":
            try:
                th = {k: float(v) for k, v in items.items()}
            except ValueError as exc:
                raise ConfigError(f"bad threshold value: {exc}") from None
            cfg.experiment = replace(cfg.experiment, thresholds=th)
        elif section in ("noise", "problem", "csr", "solver", "evaluate", "experiment"):
            setattr(cfg, section, _fill(section, getattr(cfg, section), items))
        else:
            raise ConfigError(f"unknown config section [{section}]")
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.problem.background not in ("lowrank", "static"):
        raise ConfigError(f"background must be 'lowrank' or 'static', got {cfg.problem.background!r}")
    if cfg.problem.stripe_mode not in ("auto", "off", "time_invariant", "time_varying"):
        raise ConfigError(f"invalid stripe_mode {cfg.problem.stripe_mode!r}")
    for b in cfg.experiment.backgrounds:
        if b not in ("lowrank", "static"):
            raise ConfigError(f"invalid experiment background {b!r}")
    for c in cfg.experiment.cases:
        if c not in (1, 2, 3):
            raise ConfigError(f"invalid experiment case {c}")
    for key in cfg.experiment.thresholds:
        if not (key.startswith("min_") or key.startswith("max_")):
            raise ConfigError(f"threshold keys must start with min_ or max_, got {key!r}")
