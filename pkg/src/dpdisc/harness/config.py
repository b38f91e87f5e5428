"""JSON experiment configuration. Unknown keys are rejected at every level."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .._validation import parse_epsilon
from ..attacks import EXTRACTORS
from ..binsel import BinRule
from ..discretizers import DISCRETIZERS
from ..domain import DomainSource
from ..estimators import SAMPLING
from ..exceptions import ConfigError
from .data import BENCHMARK_DISTRIBUTIONS, Distribution

DEFAULT_BINS = (5, 10, 20, 50, 100, 250)
DEFAULT_EPSILONS = (0.01, 0.1, 1.0, 10.0, 100.0, math.inf)


class Setting(str, enum.Enum):
    US1 = "US1"
    US2 = "US2"
    US3LITE = "US3lite"
    PS1 = "PS1"


@dataclass
class DatasetConfig:
    """Where the data comes from.

    ``kind='controlled'`` sweeps ``distributions`` x ``sizes``;
    ``kind='csv'`` reads ``path`` (``label`` names a binary column);
    ``kind='wine_like'`` generates ``n`` rows (``plant_target`` for attacks).
    """

    kind: str = "controlled"
    distributions: tuple = BENCHMARK_DISTRIBUTIONS
    sizes: tuple = (10000,)
    path: Optional[str] = None
    label: Optional[str] = None
    n: int = 4898
    plant_target: bool = False

    def validate(self):
        if self.kind not in ("controlled", "csv", "wine_like"):
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "controlled":
            if not self.distributions or not self.sizes:
                raise ConfigError("controlled datasets need non-empty distributions and sizes")
            for d in self.distributions:
                try:
                    Distribution(d)
                except ValueError:
                    raise ConfigError(f"unknown distribution {d!r}") from None
            if any(int(s) < 2 for s in self.sizes):
                raise ConfigError("dataset sizes must be >= 2")
        if self.kind == "csv" and not self.path:
            raise ConfigError("csv datasets need a path")
        if self.kind == "wine_like" and self.n < 10:
            raise ConfigError("wine_like needs n >= 10")


@dataclass
class ExperimentConfig:
    setting: str
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    discretizers: tuple = ("uniform", "quantile", "kmeans", "privtree")
    bins: tuple = DEFAULT_BINS
    epsilons: tuple = DEFAULT_EPSILONS
    domain_strategies: tuple = ("provided",)
    sampling: str = "uniform"
    models: int = 3
    synth_sets: int = 3
    seed: int = 0
    output: str = "results"
    discretization_share: float = 0.1
    eval_bins: int = 20
    test_fraction: float = 0.2
    # attack settings
    extractors: tuple = EXTRACTORS
    epsilon_g: float = 1.0
    n_models_per_class: int = 50
    n_synth: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.dataset, dict):
            self.dataset = _build(DatasetConfig, self.dataset, "dataset")
        for name in ("discretizers", "bins", "epsilons", "domain_strategies", "extractors"):
            setattr(self, name, tuple(getattr(self, name)))
        if isinstance(self.dataset.distributions, list):
            self.dataset.distributions = tuple(self.dataset.distributions)
        if isinstance(self.dataset.sizes, list):
            self.dataset.sizes = tuple(self.dataset.sizes)
        self.epsilons = tuple(parse_epsilon(e) for e in self.epsilons)
        self.epsilon_g = parse_epsilon(self.epsilon_g)
        self.validate()

    def validate(self):
        try:
            self.setting = Setting(self.setting).value
        except ValueError:
            raise ConfigError(f"unknown setting {self.setting!r}") from None
        self.dataset.validate()
        for name in ("discretizers", "bins", "epsilons", "domain_strategies"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if self.setting == Setting.PS1.value and not self.extractors:
            raise ConfigError("extractors must not be empty")
        for d in self.discretizers:
            if d not in DISCRETIZERS:
                raise ConfigError(f"unknown discretizer {d!r}")
        for b in self.bins:
            if isinstance(b, bool):
                raise ConfigError("bins must be integers or rule names")
            if isinstance(b, int):
                if b < 1:
                    raise ConfigError("bin counts must be >= 1")
            else:
                try:
                    BinRule(b)
                except ValueError:
                    raise ConfigError(f"unknown bin rule {b!r}") from None
        for e in self.epsilons:
            if math.isnan(e) or e <= 0:
                raise ConfigError("epsilons must be > 0 (use 'inf' for no noise)")
        for s in self.domain_strategies:
            try:
                DomainSource(s)
            except ValueError:
                raise ConfigError(f"unknown domain strategy {s!r}") from None
        for x in self.extractors:
            if x not in EXTRACTORS:
                raise ConfigError(f"unknown extractor {x!r}")
        if self.sampling not in SAMPLING:
            raise ConfigError(f"sampling must be one of {SAMPLING}")
        if self.models < 1 or self.synth_sets < 1:
            raise ConfigError("repeats must be >= 1")
        if not 0 < self.discretization_share < 1:
            raise ConfigError("discretization_share must lie in (0, 1)")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def to_dict(self):
        d = asdict(self)
        d["epsilons"] = [_eps(e) for e in self.epsilons]
        d["epsilon_g"] = _eps(self.epsilon_g)
        for k, v in list(d.items()):
            if isinstance(v, tuple):
                d[k] = list(v)
        d["dataset"] = {k: list(v) if isinstance(v, tuple) else v for k, v in d["dataset"].items()}
        return d

    @classmethod
    def from_dict(cls, d):
        return _build(cls, d, "config")

    @classmethod
    def from_json(cls, path):
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)


def _eps(e):
    return "inf" if math.isinf(e) else e


def _build(cls, d, where):
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None
