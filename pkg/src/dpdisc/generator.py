"""Laplace-histogram marginal model and the end-to-end synthesis pipeline.

Each column is discretized, its bin counts are released with the Laplace
mechanism, and synthetic rows are drawn independently per column (a product
of one-way marginals). Sampling is post-processing and never touches the
budget ledger.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Mapping, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_budget, check_matrix, parse_epsilon
from .binsel import BinRule
from .discretizers import BinnedColumn, BinSpec, BinStrategy
from .domain import DomainSource
from .estimators import SAMPLING, FittedColumn, fit_categorical_column, fit_column
from .exceptions import ConfigError, DPDiscError, EmptyDataError, InvalidParameterError
from .mechanisms import BudgetLedger, PrivacyBudget, SeededRng, as_generator, as_seeded, laplace_noise


@dataclass(frozen=True, eq=False)
class HistogramModel:
    probs: np.ndarray
    spec: BinSpec

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (self.spec.n_bins,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InvalidParameterError("probabilities must be non-negative, one per bin, summing to 1")
        object.__setattr__(self, "probs", p)


def fit_histogram_dp(binned: BinnedColumn, budget, rng=None) -> HistogramModel:
    """Laplace(1/epsilon) on every bin count, clamp at 0, normalise.

    An all-zero noisy histogram becomes the uniform distribution.
    """
    budget = check_budget(budget)
    counts = binned.counts().astype(float)
    if not budget.is_infinite:
        if budget.epsilon <= 0:
            raise InvalidParameterError("histogram model needs epsilon > 0")
        counts = counts + laplace_noise(1.0 / budget.epsilon, rng, size=counts.size)
    counts = np.maximum(counts, 0.0)
    total = counts.sum()
    if total <= 0:
        probs = np.full(counts.size, 1.0 / counts.size)
    else:
        probs = counts / total
        probs /= probs.sum()
    return HistogramModel(probs, binned.spec)


def sample_histogram(model: HistogramModel, n: int, rng=None) -> BinnedColumn:
    if n < 0:
        raise InvalidParameterError("n must be >= 0")
    gen = as_generator(rng)
    idx = gen.choice(model.probs.size, size=int(n), p=model.probs) + 1
    return BinnedColumn(idx, model.spec)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class PipelineConfig:
    """Settings for :func:`pipeline_run`.

    ``discretization_share`` of the budget goes to discretization (split
    equally across numeric columns) and the rest to the histograms (split
    equally across all columns). ``bounds`` maps column name to ``(lo, hi)``
    for the provided-domain strategy.
    """

    domain_strategy: str = "provided"
    discretizer: str = "uniform"
    bins: object = 20
    sampling: str = "uniform"
    epsilon: float = 1.0
    delta: float = 0.0
    discretization_share: float = 0.1
    domain_share: float = 0.5
    mixture_share: float = 0.5
    bounds: Optional[dict] = None
    categorical: tuple = ()
    kmeans_iter: int = 10

    def __post_init__(self):
        self.epsilon = parse_epsilon(self.epsilon)
        self.validate()

    def validate(self):
        try:
            DomainSource(self.domain_strategy)
            BinStrategy(self.discretizer)
            if not isinstance(self.bins, int):
                BinRule(self.bins)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.sampling not in SAMPLING:
            raise ConfigError(f"sampling must be one of {SAMPLING}")
        for name in ("discretization_share", "domain_share", "mixture_share"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie strictly between 0 and 1, got {v}")
        PrivacyBudget(self.epsilon, self.delta)

    @property
    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(self.epsilon, self.delta)

    def to_dict(self):
        d = asdict(self)
        d["epsilon"] = "inf" if math.isinf(self.epsilon) else self.epsilon
        d["categorical"] = list(self.categorical)
        if self.bounds is not None:
            d["bounds"] = {k: list(v) for k, v in self.bounds.items()}
        return d

    @classmethod
    def from_dict(cls, d: Mapping):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown pipeline keys: {sorted(unknown)}")
        d = dict(d)
        if "categorical" in d:
            d["categorical"] = tuple(d["categorical"])
        if d.get("bounds") is not None:
            d["bounds"] = {k: tuple(v) for k, v in d["bounds"].items()}
        return cls(**d)


@dataclass
class ColumnModel:
    fitted: FittedColumn
    histogram: HistogramModel


@dataclass
class ProductModel:
    """Independent per-column histogram models; sampling is free post-processing."""

    columns: dict

    def sample(self, n: int, rng=None) -> dict:
        rng = as_seeded(rng)
        out = {}
        for name, cm in self.columns.items():
            col_rng = rng.child("sample", name)
            binned = sample_histogram(cm.histogram, n, col_rng)
            out[name] = cm.fitted.decode(binned, col_rng.generator)
        return out

    @property
    def specs(self) -> dict:
        return {name: cm.fitted.spec for name, cm in self.columns.items()}


@dataclass
class SyntheticDataset:
    columns: dict
    config: PipelineConfig
    seed: int
    stream: int
    ledger: BudgetLedger
    model: ProductModel = field(repr=False)

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def to_matrix(self, names=None) -> np.ndarray:
        names = list(self.columns) if names is None else names
        return np.column_stack([self.columns[n] for n in names])


def _check_dataset(dataset) -> dict:
    if not dataset:
        raise EmptyDataError("dataset has no columns")
    cols = {str(k): np.asarray(v, dtype=float) for k, v in dataset.items()}
    lengths = {v.size for v in cols.values()}
    if len(lengths) != 1:
        raise InvalidParameterError("all columns must have the same length")
    if lengths.pop() == 0:
        raise EmptyDataError("dataset has no rows")
    return cols


def fit_product_model(
    dataset,
    config: PipelineConfig,
    disc_budget: PrivacyBudget,
    model_budget: PrivacyBudget,
    rng=None,
    disc_ledger: Optional[BudgetLedger] = None,
    model_ledger: Optional[BudgetLedger] = None,
) -> ProductModel:
    """Fit discretizers with ``disc_budget`` and histograms with ``model_budget``."""
    cols = _check_dataset(dataset)
    rng = as_seeded(rng)
    disc_ledger = disc_ledger if disc_ledger is not None else BudgetLedger(disc_budget)
    model_ledger = model_ledger if model_ledger is not None else BudgetLedger(model_budget)
    categorical = set(config.categorical)
    numeric = [n for n in cols if n not in categorical]

    disc_budgets = dict(zip(numeric, disc_ledger.split([(n, 1.0 / len(numeric)) for n in numeric]))) if numeric else {}
    model_budgets = dict(zip(cols, model_ledger.split([(n, 1.0 / len(cols)) for n in cols])))
    bounds = config.bounds or {}
    rice_eps = disc_budget.epsilon + model_budget.epsilon

    fitted = {}
    for name, x in cols.items():
        if name in categorical:
            fitted[name] = fit_categorical_column(x)
            continue
        col_ledger = disc_ledger.subledger(name, disc_budgets[name])
        try:
            fitted[name] = fit_column(
                x,
                strategy=config.discretizer,
                bins=config.bins,
                budget=disc_budgets[name],
                domain_strategy=config.domain_strategy,
                bounds=bounds.get(name),
                sampling=config.sampling,
                domain_share=config.domain_share,
                mixture_share=config.mixture_share,
                rice_epsilon=rice_eps,
                kmeans_iter=config.kmeans_iter,
                rng=rng.child("column", name, "discretize"),
                ledger=col_ledger,
            )
        except DPDiscError as exc:
            raise type(exc)(f"column {name!r}: {exc}") from exc

    columns = {}
    for name, x in cols.items():
        binned = fitted[name].encode(x)
        hist = fit_histogram_dp(binned, model_budgets[name], rng.child("column", name, "model"))
        columns[name] = ColumnModel(fitted[name], hist)
    return ProductModel(columns)


def pipeline_run(dataset, config: PipelineConfig, n_out: int, rng=None) -> SyntheticDataset:
    """Discretize, model and sample ``n_out`` synthetic rows.

    The budget is split ``discretization_share`` / ``1 - discretization_share``
    between discretization and modeling; the returned ledger records every
    allocation and never exceeds ``config.budget``.
    """
    if n_out < 0:
        raise InvalidParameterError("n_out must be >= 0")
    rng = as_seeded(rng)
    ledger = BudgetLedger(config.budget)
    disc_b, model_b = ledger.split(
        [("discretization", config.discretization_share), ("modeling", 1.0 - config.discretization_share)]
    )
    model = fit_product_model(
        dataset,
        config,
        disc_b,
        model_b,
        rng.child("fit"),
        ledger.subledger("discretization", disc_b),
        ledger.subledger("modeling", model_b),
    )
    columns = model.sample(n_out, rng.child("generate"))
    return SyntheticDataset(columns, config, rng.seed, rng.stream, ledger, model)


class DPHistogramSynthesizer(BaseEstimator):
    """Array interface to the pipeline: ``fit(X)`` then ``sample(n)``.

    Parameters mirror :class:`PipelineConfig`; ``bounds`` is a list of
    ``(lo, hi)`` pairs (or one shared pair) and ``categorical`` a list of
    column indices.
    """

    def __init__(
        self,
        discretizer="uniform",
        n_bins=20,
        epsilon=1.0,
        domain="provided",
        bounds=None,
        sampling="uniform",
        discretization_share=0.1,
        domain_share=0.5,
        mixture_share=0.5,
        categorical=(),
        random_state=None,
    ):
        self.discretizer = discretizer
        self.n_bins = n_bins
        self.epsilon = epsilon
        self.domain = domain
        self.bounds = bounds
        self.sampling = sampling
        self.discretization_share = discretization_share
        self.domain_share = domain_share
        self.mixture_share = mixture_share
        self.categorical = categorical
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_matrix(X)
        d = X.shape[1]
        names = [str(j) for j in range(d)]
        bounds = None
        if self.bounds is not None:
            b = list(self.bounds)
            pairs = [tuple(b)] * d if len(b) == 2 and np.isscalar(b[0]) else [tuple(p) for p in b]
            bounds = dict(zip(names, pairs))
        self.config_ = PipelineConfig(
            domain_strategy=self.domain,
            discretizer=self.discretizer,
            bins=self.n_bins,
            sampling=self.sampling,
            epsilon=self.epsilon,
            discretization_share=self.discretization_share,
            domain_share=self.domain_share,
            mixture_share=self.mixture_share,
            bounds=bounds,
            categorical=tuple(str(c) for c in self.categorical),
        )
        rng = as_seeded(self.random_state)
        self.ledger_ = BudgetLedger(self.config_.budget)
        disc_b, model_b = self.ledger_.split(
            [("discretization", self.discretization_share), ("modeling", 1.0 - self.discretization_share)]
        )
        self.model_ = fit_product_model(
            {n: X[:, j] for j, n in enumerate(names)},
            self.config_,
            disc_b,
            model_b,
            rng.child("fit"),
            self.ledger_.subledger("discretization", disc_b),
            self.ledger_.subledger("modeling", model_b),
        )
        self.bin_specs_ = list(self.model_.specs.values())
        self.n_features_in_ = d
        self._sample_rng = rng.child("generate")
        self._n_draws = 0
        return self

    def sample(self, n, random_state=None):
        check_is_fitted(self, "model_")
        if random_state is not None:
            rng = as_seeded(random_state)
        else:
            # successive calls draw fresh but reproducible streams
            rng = self._sample_rng.child(self._n_draws)
            self._n_draws += 1
        cols = self.model_.sample(n, rng)
        return np.column_stack(list(cols.values())) if cols else np.empty((n, 0))
