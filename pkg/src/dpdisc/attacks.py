"""Shadow-model membership inference against the histogram synthesizer.

The attacker picks the most isolated record as target, trains many
synthesizers with and without it, summarizes each synthetic dataset as a
feature vector and fits a classifier to tell the two worlds apart. The AUC
of that classifier on held-out shadow models measures the leakage.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import rankdata

from ._validation import check_matrix, parse_epsilon
from .discretizers import BinStrategy, encode
from .domain import DomainSource
from .exceptions import ConfigError, DPDiscError, EmptyDataError, FeatureExplosionError, NoTargetError
from .generator import PipelineConfig, fit_product_model
from .mechanisms import PrivacyBudget, SeededRng
from .metrics import LogisticRegressionGD

EXTRACTORS = ("groundhog", "querybased")


@dataclass(frozen=True, eq=False)
class TargetRecord:
    index: int
    values: np.ndarray
    outside_domain: bool


def _as_named(dataset):
    if isinstance(dataset, dict):
        names = [str(k) for k in dataset]
        X = np.column_stack([np.asarray(v, dtype=float) for v in dataset.values()])
    else:
        X = check_matrix(dataset)
        names = [str(j) for j in range(X.shape[1])]
    return names, check_matrix(X)


def select_target(dataset, domains=None) -> TargetRecord:
    """Record with the largest mean L2 distance to all others (ties: lowest index).

    Columns are scaled by their domain width (``domains`` is a list of
    ``(lo, hi)`` or :class:`Domain`; default: the data's min/max).
    """
    _, X = _as_named(dataset)
    n = X.shape[0]
    if n < 2:
        raise NoTargetError("need at least two records to pick a target")
    if domains is None:
        widths = np.ptp(X, axis=0)
    else:
        widths = np.array([d.width if hasattr(d, "width") else d[1] - d[0] for d in domains], dtype=float)
    widths = np.where(widths > 0, widths, 1.0)
    Z = X / widths
    mean_dist = np.zeros(n)
    for start in range(0, n, 1024):
        mean_dist[start : start + 1024] = cdist(Z[start : start + 1024], Z).sum(axis=1) / (n - 1)
    if not np.any(mean_dist > 0):
        raise NoTargetError("all records are identical")
    return target_at(X, int(np.argmax(mean_dist)))


def target_at(dataset, index: int) -> TargetRecord:
    """Use record ``index`` as the target, e.g. a deliberately planted one."""
    _, X = _as_named(dataset)
    if not -X.shape[0] <= index < X.shape[0] or X.shape[0] < 2:
        raise NoTargetError(f"no record {index} among {X.shape[0]}")
    index %= X.shape[0]
    rest = np.delete(X, index, axis=0)
    x = X[index]
    outside = bool(np.any((x > rest.max(axis=0)) | (x < rest.min(axis=0))))
    return TargetRecord(index, x.copy(), outside)


def groundhog_features(synth) -> np.ndarray:
    """Per column: min, max, mean, median and population std, concatenated."""
    _, S = _as_named(synth)
    stats = np.vstack([S.min(axis=0), S.max(axis=0), S.mean(axis=0), np.median(S, axis=0), S.std(axis=0)])
    return stats.T.ravel()


def querybased_features(synth, target: TargetRecord, specs, max_columns: int = 12) -> np.ndarray:
    """Counts of synthetic rows sharing the target's bin on every column of each subset.

    Feature ``s`` (a bitmask over columns, bit ``j`` = column ``j``) is the
    number of rows matching the target on all columns in ``s``; feature 0 is
    the row count. Where the target lies outside a column's domain it has no
    bin, and subsets containing that column count nothing.
    """
    _, S = _as_named(synth)
    d = S.shape[1]
    if d > max_columns:
        raise FeatureExplosionError(f"{d} columns give 2^{d} subset features; the cap is {max_columns} columns")
    if len(specs) != d or np.size(target.values) != d:
        raise EmptyDataError("target, synthetic data and specs must have the same columns")
    match = np.zeros(S.shape[0], dtype=np.int64)
    for j, spec in enumerate(specs):
        t = target.values[j]
        if not spec.domain.contains(t):
            continue  # no bin holds the target, so no row can share it
        t_bin = encode([t], spec).indices[0]
        match |= (encode(S[:, j], spec).indices == t_bin).astype(np.int64) << j
    # rows whose match mask contains s, via a superset-sum over the bitmask lattice
    counts = np.bincount(match, minlength=1 << d).astype(np.int64)
    for j in range(d):
        bit = 1 << j
        blocks = counts.reshape(-1, 2 * bit)
        blocks[:, :bit] += blocks[:, bit:]
    return counts.astype(float)


def auc(scores_in, scores_out) -> float:
    """Mann-Whitney estimate of P(score_in > score_out) + P(tie) / 2."""
    a = np.asarray(scores_in, dtype=float).ravel()
    b = np.asarray(scores_out, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptyDataError("AUC needs scores for both classes")
    ranks = rankdata(np.concatenate([a, b]))
    u = ranks[: a.size].sum() - a.size * (a.size + 1) / 2.0
    return float(u / (a.size * b.size))


@dataclass
class ShadowGameConfig:
    n_models_per_class: int = 50
    discretizer: str = "uniform"
    domain_strategy: str = "raw"
    epsilon_g: float = 1.0
    epsilon_d: float = 1.0
    extractor: str = "groundhog"
    seed: int = 0
    bins: object = 20
    sampling: str = "uniform"
    bounds: Optional[dict] = None
    n_synth: Optional[int] = None
    max_columns: int = 12

    def __post_init__(self):
        self.epsilon_g = parse_epsilon(self.epsilon_g)
        self.epsilon_d = parse_epsilon(self.epsilon_d)
        n = self.n_models_per_class
        if not isinstance(n, int) or n < 2 or n % 2:
            raise ConfigError("n_models_per_class must be an even integer >= 2")
        if self.extractor not in EXTRACTORS:
            raise ConfigError(f"extractor must be one of {EXTRACTORS}")
        try:
            BinStrategy(self.discretizer)
            DomainSource(self.domain_strategy)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self):
        d = asdict(self)
        for k in ("epsilon_g", "epsilon_d"):
            d[k] = "inf" if math.isinf(d[k]) else d[k]
        if self.bounds is not None:
            d["bounds"] = {k: list(v) for k, v in self.bounds.items()}
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.blake2b(blob, digest_size=8).hexdigest()

    def pipeline_config(self) -> PipelineConfig:
        # domain extraction (if DP) takes half of epsilon_d, the rest goes to the edges
        return PipelineConfig(
            domain_strategy=self.domain_strategy,
            discretizer=self.discretizer,
            bins=self.bins,
            sampling=self.sampling,
            epsilon=self.epsilon_d + self.epsilon_g,
            domain_share=0.5,
            bounds=self.bounds,
        )


@dataclass(eq=False)
class AttackScore:
    auc: float
    fingerprint: str
    config: ShadowGameConfig
    target: TargetRecord
    features_in: np.ndarray = field(repr=False)
    features_out: np.ndarray = field(repr=False)

    def to_row(self):
        c = self.config.to_dict()
        return {
            "domain_strategy": c["domain_strategy"],
            "discretizer": c["discretizer"],
            "epsilon_d": c["epsilon_d"],
            "epsilon_g": c["epsilon_g"],
            "extractor": c["extractor"],
            "n_models": self.config.n_models_per_class,
            "auc": self.auc,
            "seed": self.config.seed,
        }


def _default_generator(config: ShadowGameConfig):
    pipe = config.pipeline_config()
    disc_b, model_b = PrivacyBudget(config.epsilon_d), PrivacyBudget(config.epsilon_g)

    def generate(columns: dict, n_out: int, rng: SeededRng):
        model = fit_product_model(columns, pipe, disc_b, model_b, rng.child("fit"))
        synth = model.sample(n_out, rng.child("generate"))
        return np.column_stack(list(synth.values())), list(model.specs.values())

    return generate


def run_shadow_game(
    dataset,
    config: ShadowGameConfig,
    target: Optional[TargetRecord] = None,
    generator: Optional[Callable] = None,
) -> AttackScore:
    """Play the IN/OUT game and return the attack AUC.

    ``generator(columns, n_out, rng) -> (synth_matrix, specs)`` replaces the
    default histogram synthesizer, e.g. to simulate a model that ignores its
    input. Every shadow model draws the same number of synthetic rows
    (``config.n_synth``, default the full dataset size) so the row count
    itself carries no signal.
    """
    names, X = _as_named(dataset)
    if target is None:
        target = select_target(X)
    gen_fn = generator or _default_generator(config)
    n_out = config.n_synth or X.shape[0]
    root = SeededRng(config.seed)
    worlds = {"in": X, "out": np.delete(X, target.index, axis=0)}

    feats = {}
    for world, data in worlds.items():
        columns = {n: data[:, j] for j, n in enumerate(names)}
        rows = []
        for i in range(config.n_models_per_class):
            try:
                S, specs = gen_fn(columns, n_out, root.child("shadow", world, i))
            except DPDiscError as exc:
                raise type(exc)(f"shadow model {world}/{i}: {exc}") from exc
            if config.extractor == "groundhog":
                rows.append(groundhog_features(S))
            else:
                rows.append(querybased_features(S, target, specs, config.max_columns))
        feats[world] = np.vstack(rows)

    h = config.n_models_per_class // 2
    F_fit = np.vstack([feats["in"][:h], feats["out"][:h]])
    y_fit = np.r_[np.ones(h), np.zeros(h)]
    clf = LogisticRegressionGD().fit(F_fit, y_fit)
    score = auc(clf.decision_function(feats["in"][h:]), clf.decision_function(feats["out"][h:]))
    return AttackScore(score, config.fingerprint(), config, target, feats["in"], feats["out"])
