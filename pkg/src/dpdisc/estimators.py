"""Column-level fitting and the scikit-learn style :class:`DPDiscretizer`."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_budget, check_column, check_matrix
from .binsel import BinCount, select_bins
from .discretizers import (
    BinMixture,
    BinnedColumn,
    BinSpec,
    BinStrategy,
    categorical_spec,
    decode_categorical,
    decode_mixture,
    decode_uniform,
    encode,
    fit_discretizer,
    fit_mixture,
)
from .domain import Domain, DomainSource, resolve_domain
from .exceptions import InvalidParameterError
from .mechanisms import BudgetLedger, PrivacyBudget, as_generator, as_seeded

SAMPLING = ("uniform", "mixture")


@dataclass(frozen=True)
class FittedColumn:
    """Everything needed to encode and decode one column."""

    spec: BinSpec
    bin_count: Optional[BinCount] = None
    mixture: Optional[BinMixture] = None

    @property
    def domain(self) -> Domain:
        return self.spec.domain

    @property
    def categorical(self) -> bool:
        return self.spec.strategy is BinStrategy.CATEGORICAL

    def encode(self, values) -> BinnedColumn:
        return encode(values, self.spec)

    def decode(self, binned: BinnedColumn, rng=None) -> np.ndarray:
        if self.categorical:
            return decode_categorical(binned)
        if self.mixture is not None:
            return decode_mixture(binned, self.mixture, rng)
        return decode_uniform(binned, rng)

    def to_dict(self):
        out = {"spec": self.spec.to_dict(), "n_bins": self.spec.n_bins}
        if self.bin_count is not None:
            out["requested_bins"] = self.bin_count.b
            out["bin_rule"] = self.bin_count.strategy.value
        if self.mixture is not None:
            out["mixture"] = self.mixture.to_dict()
        return out


def fit_column(
    values,
    *,
    strategy="uniform",
    bins=20,
    budget=None,
    domain_strategy="provided",
    bounds=None,
    sampling="uniform",
    domain_share=0.5,
    mixture_share=0.5,
    rice_epsilon=None,
    kmeans_iter=10,
    rng=None,
    ledger: Optional[BudgetLedger] = None,
) -> FittedColumn:
    """Resolve the domain, pick ``b``, fit the edges and (optionally) the mixture.

    ``budget`` is this column's whole discretization budget. With a DP
    domain, ``domain_share`` of it goes to domain extraction; with mixture
    sampling, ``mixture_share`` of what remains goes to the per-bin moments.
    Allocations are recorded in ``ledger`` when given (its total must be
    ``budget``).
    """
    x = check_column(values)
    budget = check_budget(budget if budget is not None else np.inf)
    if sampling not in SAMPLING:
        raise InvalidParameterError(f"sampling must be one of {SAMPLING}, got {sampling!r}")
    ledger = ledger if ledger is not None else BudgetLedger(budget)
    rng = as_seeded(rng)
    domain_strategy = DomainSource(domain_strategy)

    remaining = 1.0
    if domain_strategy is DomainSource.DP:
        dom_budget = ledger.spend("domain", domain_share)
        remaining -= domain_share
        domain = resolve_domain(x, "dp", epsilon=dom_budget, rng=rng.child("domain"))
    else:
        domain = resolve_domain(x, domain_strategy, bounds=bounds)

    if sampling == "mixture":
        edge_frac, mix_frac = remaining * (1.0 - mixture_share), remaining * mixture_share
    else:
        edge_frac, mix_frac = remaining, 0.0

    bin_count = select_bins(
        bins, values=x, n=x.size, epsilon=rice_epsilon if rice_epsilon is not None else budget.epsilon
    )
    edge_budget = ledger.spend("edges", edge_frac) if edge_frac > 0 else PrivacyBudget(np.inf)
    extra = {"n_iter": kmeans_iter} if BinStrategy(strategy) is BinStrategy.KMEANS else {}
    spec = fit_discretizer(strategy, x, domain, bin_count.b, edge_budget, rng.child("edges"), **extra)

    mixture = None
    if mix_frac > 0:
        mix_budget = ledger.spend("mixture", mix_frac)
        mixture = fit_mixture(x, encode(x, spec), mix_budget, rng.child("mixture"))
    return FittedColumn(spec, bin_count, mixture)


def fit_categorical_column(values, n_categories=None) -> FittedColumn:
    """Ordinal codes ``0..K-1`` pass through as one bin per code; no budget."""
    x = check_column(values)
    codes = np.rint(x)
    if np.any(codes != x) or np.any(codes < 0):
        raise InvalidParameterError("categorical columns must hold non-negative integer codes")
    k = int(n_categories) if n_categories is not None else int(codes.max()) + 1
    return FittedColumn(categorical_spec(max(k, 1)))


class DPDiscretizer(TransformerMixin, BaseEstimator):
    """Differentially private per-column discretizer.

    ``transform`` returns 1-based bin indices and ``inverse_transform``
    samples continuous values back from them, uniformly within each bin or
    from the fitted per-bin truncated normals.

    Parameters
    ----------
    strategy : {'uniform', 'quantile', 'kmeans', 'privtree'}
    n_bins : int or str
        A fixed count or a rule name ('rice', 'rice_opt', 'doane', 'fdr',
        'shimazaki'). Only 'rice' and 'rice_opt' are data independent.
    epsilon : float
        Total budget, split equally across columns. ``inf`` disables noise.
    domain : {'provided', 'raw', 'dp'}
        How each column's ``[lo, hi]`` is obtained. 'raw' is not private.
    bounds : sequence of (lo, hi), optional
        Required when ``domain='provided'``; one pair per column or a single
        pair shared by all columns.
    sampling : {'uniform', 'mixture'}
    domain_share, mixture_share : float
        Fractions of a column's budget spent on DP domain extraction and on
        the mixture moments.
    random_state : int, SeededRng or None
    """

    def __init__(
        self,
        strategy="uniform",
        n_bins=20,
        epsilon=1.0,
        domain="provided",
        bounds=None,
        sampling="uniform",
        domain_share=0.5,
        mixture_share=0.5,
        kmeans_iter=10,
        random_state=None,
    ):
        self.strategy = strategy
        self.n_bins = n_bins
        self.epsilon = epsilon
        self.domain = domain
        self.bounds = bounds
        self.sampling = sampling
        self.domain_share = domain_share
        self.mixture_share = mixture_share
        self.kmeans_iter = kmeans_iter
        self.random_state = random_state

    def _column_bounds(self, d):
        if self.bounds is None:
            return [None] * d
        bounds = list(self.bounds)
        if len(bounds) == 2 and np.isscalar(bounds[0]):
            return [tuple(bounds)] * d
        if len(bounds) != d:
            raise InvalidParameterError(f"expected {d} (lo, hi) pairs, got {len(bounds)}")
        return bounds

    def fit(self, X, y=None):
        X = check_matrix(X)
        d = X.shape[1]
        BinStrategy(self.strategy)
        budget = check_budget(self.epsilon)
        rng = as_seeded(self.random_state)
        self.ledger_ = BudgetLedger(budget)
        col_budgets = self.ledger_.split([(f"column{j}", 1.0 / d) for j in range(d)])
        bounds = self._column_bounds(d)
        self.columns_ = []
        for j in range(d):
            sub = self.ledger_.subledger(f"column{j}", col_budgets[j])
            self.columns_.append(
                fit_column(
                    X[:, j],
                    strategy=self.strategy,
                    bins=self.n_bins,
                    budget=col_budgets[j],
                    domain_strategy=self.domain,
                    bounds=bounds[j],
                    sampling=self.sampling,
                    domain_share=self.domain_share,
                    mixture_share=self.mixture_share,
                    rice_epsilon=budget.epsilon,
                    kmeans_iter=self.kmeans_iter,
                    rng=rng.child("column", j),
                    ledger=sub,
                )
            )
        self.bin_specs_ = [c.spec for c in self.columns_]
        self.n_bins_ = np.array([s.n_bins for s in self.bin_specs_])
        self.n_features_in_ = d
        self._decode_rng = rng.child("decode")
        return self

    def _check_X(self, X):
        check_is_fitted(self, "columns_")
        X = check_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise InvalidParameterError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return X

    def transform(self, X):
        X = self._check_X(X)
        return np.column_stack([c.encode(X[:, j]).indices for j, c in enumerate(self.columns_)])

    def inverse_transform(self, Xt, random_state=None):
        """Sample continuous values for 1-based bin indices (post-processing only)."""
        check_is_fitted(self, "columns_")
        Xt = np.asarray(Xt, dtype=np.int64)
        if Xt.ndim == 1:
            Xt = Xt.reshape(-1, 1)
        gen = as_generator(random_state) if random_state is not None else self._decode_rng.generator
        return np.column_stack(
            [c.decode(BinnedColumn(Xt[:, j], c.spec), gen) for j, c in enumerate(self.columns_)]
        )
