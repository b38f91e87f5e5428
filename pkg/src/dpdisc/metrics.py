"""Utility metrics comparing a synthetic dataset with the data it was trained on.

Every score lies in [0, 1] and equals 1 when the synthetic data is an exact
copy of the training data. Datasets are 2-d float arrays (rows x columns);
1-d input is treated as a single column.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, fields
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import expit
from sklearn.metrics import f1_score

from ._validation import check_matrix
from .discretizers import BinSpec, encode
from .exceptions import DegenerateDataWarning, EmptyDataError, InvalidParameterError, UndefinedRatioError
from .mechanisms import as_generator

PERCENTILES = np.arange(1, 101)


# ---------------------------------------------------------------------------
# logistic regression used by DS and PU


class LogisticRegressionGD:
    """Binary logistic regression trained by full-batch gradient descent.

    Weights start at zero and there is no regularization, so the fit is a
    deterministic function of the data. Features are standardized with the
    training mean and std before the descent.
    """

    def __init__(self, learning_rate=0.1, n_epochs=500):
        self.learning_rate = learning_rate
        self.n_epochs = n_epochs

    @staticmethod
    def loss(w, b, X, y):
        """Mean cross-entropy ``log(1 + e^z) - y z`` with ``z = X w + b``."""
        z = X @ w + b
        return float(np.mean(np.logaddexp(0.0, z) - y * z))

    @staticmethod
    def grad(w, b, X, y):
        """Gradient of :meth:`loss` with respect to ``(w, b)``."""
        r = expit(X @ w + b) - y
        return X.T @ r / y.size, r.mean()

    def fit(self, X, y):
        X = check_matrix(X)
        y = np.asarray(y, dtype=float).ravel()
        if y.size != X.shape[0]:
            raise InvalidParameterError("X and y lengths differ")
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale_ = np.where(sd > 0, sd, 1.0)
        Z = (X - self.mean_) / self.scale_
        w = np.zeros(X.shape[1])
        b = 0.0
        for _ in range(self.n_epochs):
            gw, gb = self.grad(w, b, Z, y)
            w -= self.learning_rate * gw
            b -= self.learning_rate * gb
        self.coef_, self.intercept_ = w, b
        return self

    def decision_function(self, X):
        Z = (check_matrix(X) - self.mean_) / self.scale_
        return Z @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        return expit(self.decision_function(X))

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(int)


# ---------------------------------------------------------------------------
# the six metrics


def _pair(train, synth, same_rows=False):
    A, B = check_matrix(train, name="train"), check_matrix(synth, name="synth")
    if A.shape[1] != B.shape[1]:
        raise InvalidParameterError(f"column counts differ: {A.shape[1]} vs {B.shape[1]}")
    if same_rows and A.shape[0] != B.shape[0]:
        raise InvalidParameterError(f"record similarity needs aligned rows: {A.shape[0]} vs {B.shape[0]}")
    return A, B


def record_similarity(train, synth, domains) -> float:
    """1 - mean absolute difference of aligned records, normalized by each domain's width."""
    A, B = _pair(train, synth, same_rows=True)
    widths = np.array([_width(d) for d in domains], dtype=float)
    if widths.size != A.shape[1]:
        raise InvalidParameterError("need one domain per column")
    dist = np.abs(A - B) / widths
    return float(np.clip(1.0 - dist.mean(), 0.0, 1.0))


def _width(domain):
    if hasattr(domain, "width"):
        return domain.width
    lo, hi = domain
    if not hi > lo:
        raise InvalidParameterError("domain needs lo < hi")
    return hi - lo


def max_percentile_distance(train_col, synth_col) -> float:
    """1 - largest gap between the p-th percentiles (p = 1..100) after joint min-max scaling."""
    a = np.asarray(train_col, dtype=float).ravel()
    s = np.asarray(synth_col, dtype=float).ravel()
    if a.size == 0 or s.size == 0:
        raise EmptyDataError("percentile distance needs non-empty columns")
    lo = min(a.min(), s.min())
    span = max(a.max(), s.max()) - lo
    if span == 0:
        return 1.0
    qa = np.percentile((a - lo) / span, PERCENTILES)
    qs = np.percentile((s - lo) / span, PERCENTILES)
    return float(np.clip(1.0 - np.max(np.abs(qa - qs)), 0.0, 1.0))


def mean_percentile_distance(train, synth) -> float:
    """Per-column MPD averaged over columns."""
    A, B = _pair(train, synth)
    return float(np.mean([max_percentile_distance(A[:, j], B[:, j]) for j in range(A.shape[1])]))


def discriminator_similarity(train, synth, test_holdout=None, rng=None) -> float:
    """How well a logistic regression tells real from synthetic rows; 1 = not at all.

    Equal-size samples of real and synthetic rows train the classifier.
    Scoring uses an equal-size mix of unseen real rows (``test_holdout``, or
    the other half of ``train``) and unseen synthetic rows, giving
    ``1 - (2/n) sum |0.5 - p_i|``.
    """
    gen = as_generator(rng)
    A, B = _pair(train, synth)
    A = A[gen.permutation(A.shape[0])]
    B = B[gen.permutation(B.shape[0])]
    if test_holdout is None:
        h = A.shape[0] // 2
        real_fit, real_eval = A[:h], A[h:]
    else:
        H = check_matrix(test_holdout, name="test_holdout")
        real_fit, real_eval = A, H[gen.permutation(H.shape[0])]
    h = B.shape[0] // 2
    synth_fit, synth_eval = B[:h], B[h:]
    k_fit = min(real_fit.shape[0], synth_fit.shape[0])
    k_eval = min(real_eval.shape[0], synth_eval.shape[0])
    if k_fit < 1 or k_eval < 1:
        raise InvalidParameterError("discriminator needs at least one real and one synthetic row per split")
    X = np.vstack([real_fit[:k_fit], synth_fit[:k_fit]])
    y = np.r_[np.zeros(k_fit), np.ones(k_fit)]
    clf = LogisticRegressionGD().fit(X, y)
    p = clf.predict_proba(np.vstack([real_eval[:k_eval], synth_eval[:k_eval]]))
    return float(np.clip(1.0 - 2.0 * np.mean(np.abs(0.5 - p)), 0.0, 1.0))


def _ratio(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    out = np.ones_like(hi)
    np.divide(lo, hi, out=out, where=hi > 0)
    return out


def _query_counts(Ia, Is, cols, subsets):
    ma = np.ones(Ia.shape[0], dtype=bool)
    ms = np.ones(Is.shape[0], dtype=bool)
    for c, bins in zip(cols, subsets):
        ma &= np.isin(Ia[:, c], bins)
        ms &= np.isin(Is[:, c], bins)
    return ma.sum(), ms.sum()


def _random_subset(b, gen):
    while True:
        pick = np.flatnonzero(gen.random(b) < 0.5) + 1
        if pick.size:
            return pick


def query_similarity_binned(
    train_idx, synth_idx, n_bins: Sequence[int], n_queries=100, dims=(1, 2, 3), rng=None, universe=False
) -> float:
    """QS on 1-based bin indices.

    A query picks ``k`` columns and a random non-empty set of bins for each;
    its score is min/max of the matching row counts (0/0 counts as 1). The
    result is the mean over dimensionalities of the mean query score. With
    ``universe=True`` every possible query is evaluated instead of sampling.
    Dimensionalities larger than the number of columns are skipped.
    """
    Ia = np.asarray(train_idx, dtype=np.int64)
    Is = np.asarray(synth_idx, dtype=np.int64)
    Ia = Ia.reshape(-1, 1) if Ia.ndim == 1 else Ia
    Is = Is.reshape(-1, 1) if Is.ndim == 1 else Is
    d = Ia.shape[1]
    if Is.shape[1] != d or len(n_bins) != d:
        raise InvalidParameterError("train, synth and n_bins must describe the same columns")
    dims = [k for k in dims if 1 <= k <= d]
    if not dims:
        raise InvalidParameterError("no usable query dimensionality")
    gen = as_generator(rng)
    per_dim = []
    for k in dims:
        scores = []
        if universe:
            for cols in itertools.combinations(range(d), k):
                choices = [_all_subsets(n_bins[c]) for c in cols]
                for subsets in itertools.product(*choices):
                    scores.append(_query_counts(Ia, Is, cols, subsets))
        else:
            for _ in range(n_queries):
                cols = np.sort(gen.choice(d, size=k, replace=False))
                subsets = [_random_subset(n_bins[c], gen) for c in cols]
                scores.append(_query_counts(Ia, Is, cols, subsets))
        ca, cs = np.array(scores, dtype=float).T
        per_dim.append(_ratio(ca, cs).mean())
    return float(np.mean(per_dim))


def _all_subsets(b):
    bins = np.arange(1, b + 1)
    return [bins[list(m)] for r in range(1, b + 1) for m in itertools.combinations(range(b), r)]


def query_similarity(train, synth, specs: Sequence[BinSpec], n_queries=100, dims=(1, 2, 3), rng=None, universe=False):
    """QS for raw values: both datasets are encoded with ``specs`` first."""
    A, B = _pair(train, synth)
    if len(specs) != A.shape[1]:
        raise InvalidParameterError("need one BinSpec per column")
    Ia = np.column_stack([encode(A[:, j], s).indices for j, s in enumerate(specs)])
    Is = np.column_stack([encode(B[:, j], s).indices for j, s in enumerate(specs)])
    return query_similarity_binned(Ia, Is, [s.n_bins for s in specs], n_queries, dims, rng, universe)


def _corr(X) -> tuple[np.ndarray, bool]:
    sd = X.std(axis=0)
    const = sd == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.corrcoef(X, rowvar=False)
    r = np.atleast_2d(r)
    r = np.where(np.isfinite(r), r, 0.0)
    np.fill_diagonal(r, 1.0)
    return np.clip(r, -1.0, 1.0), bool(const.any())


def correlation_similarity(train, synth) -> float:
    """Mean elementwise min/max of the (r + 1) / 2 normalized Pearson matrices.

    Correlations involving a constant column are taken as 0, with a
    :class:`DegenerateDataWarning`.
    """
    A, B = _pair(train, synth)
    if A.shape[1] < 2:
        raise InvalidParameterError("correlation similarity needs at least 2 columns")
    ra, ca = _corr(A)
    rs, cs = _corr(B)
    if ca or cs:
        warnings.warn("constant column: its correlations are treated as 0", DegenerateDataWarning, stacklevel=2)
    return float(_ratio((ra + 1) / 2, (rs + 1) / 2).mean())


def _f1(X_fit, y_fit, X_test, y_test) -> float:
    classes = np.unique(y_fit)
    if classes.size == 1:
        pred = np.full(y_test.size, classes[0])
    else:
        pred = LogisticRegressionGD().fit(X_fit, y_fit).predict(X_test)
    return float(f1_score(y_test, pred, pos_label=1, zero_division=0.0))


def _split_label(D, label_column):
    X = np.delete(D, label_column, axis=1)
    y = np.rint(D[:, label_column]).astype(int)
    if not np.isin(y, (0, 1)).all():
        raise InvalidParameterError("label column must be binary 0/1")
    return X, y


def predictive_utility(train, synth, test, label_column: int, rng=None) -> float:
    """F1 of a model trained on synth over F1 of one trained on train, both on test; clipped to [0, 1]."""
    A, B = _pair(train, synth)
    T = check_matrix(test, name="test")
    Xa, ya = _split_label(A, label_column)
    Xs, ys = _split_label(B, label_column)
    Xt, yt = _split_label(T, label_column)
    f_real = _f1(Xa, ya, Xt, yt)
    if f_real == 0:
        raise UndefinedRatioError("F1 of the model trained on real data is 0")
    return float(np.clip(_f1(Xs, ys, Xt, yt) / f_real, 0.0, 1.0))


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class MetricReport:
    rs: Optional[float] = None
    mpd: Optional[float] = None
    ds: Optional[float] = None
    qs: Optional[float] = None
    cs: Optional[float] = None
    pu: Optional[float] = None

    def __post_init__(self):
        for name, v in self.scores().items():
            if not (0.0 <= v <= 1.0):
                raise InvalidParameterError(f"{name} = {v} is outside [0, 1]")

    def scores(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}

    @property
    def aggregate(self) -> float:
        s = self.scores()
        if not s:
            raise EmptyDataError("no metric present")
        return float(math.fsum(s.values()) / len(s))

    def to_dict(self):
        return {**self.scores(), "aggregate": self.aggregate}

    def to_rows(self, run_id):
        return [{"run": run_id, "metric": k, "score": v} for k, v in self.scores().items()]


def aggregate(parts: Mapping[str, float]) -> MetricReport:
    """Build a report from ``{'rs': .., 'qs': ..}``; its ``aggregate`` is the mean."""
    parts = {k.lower(): v for k, v in parts.items() if v is not None}
    if not parts:
        raise EmptyDataError("aggregate needs at least one metric")
    known = {f.name for f in fields(MetricReport)}
    unknown = set(parts) - known
    if unknown:
        raise InvalidParameterError(f"unknown metrics: {sorted(unknown)}")
    return MetricReport(**{k: float(v) for k, v in parts.items()})
