"""DP discretizers (uniform, quantile, k-means, PrivTree) and inverse sampling.

Bin indices are 1-based: a value ``x`` maps to bin ``i`` when
``e_i <= x < e_{i+1}``, and the last bin is closed on the right.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.stats import truncnorm

from ._validation import check_budget, check_column, check_n_bins
from .domain import Domain
from .exceptions import EmptyDataError, InvalidParameterError
from .mechanisms import as_generator, geometric_noise, laplace_noise, sample_weighted_index

MERGE_RTOL = 1e-9
# PrivTree never splits an interval narrower than this fraction of the domain.
_MIN_SPLIT_RWIDTH = 2.0**-40


class BinStrategy(str, enum.Enum):
    UNIFORM = "uniform"
    QUANTILE = "quantile"
    KMEANS = "kmeans"
    PRIVTREE = "privtree"
    CATEGORICAL = "categorical"


DISCRETIZERS = (BinStrategy.UNIFORM, BinStrategy.QUANTILE, BinStrategy.KMEANS, BinStrategy.PRIVTREE)


@dataclass(frozen=True, eq=False)
class BinSpec:
    """Strictly increasing edges ``e_1 < ... < e_{b+1}`` spanning a domain."""

    edges: np.ndarray
    domain: Domain
    strategy: BinStrategy

    def __post_init__(self):
        edges = np.array(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise InvalidParameterError("a BinSpec needs at least two edges")
        if not np.all(np.diff(edges) > 0):
            raise InvalidParameterError("bin edges must be strictly increasing")
        if edges[0] != self.domain.lo or edges[-1] != self.domain.hi:
            raise InvalidParameterError("outer edges must equal the domain bounds")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "strategy", BinStrategy(self.strategy))

    @property
    def n_bins(self) -> int:
        return self.edges.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def bin_bounds(self, index):
        """``(lower, upper)`` edge arrays for 1-based bin indices."""
        index = np.asarray(index, dtype=np.int64)
        return self.edges[index - 1], self.edges[index]

    def __eq__(self, other):
        if not isinstance(other, BinSpec):
            return NotImplemented
        return (
            self.strategy == other.strategy
            and self.domain == other.domain
            and np.array_equal(self.edges, other.edges)
        )

    def __hash__(self):
        return hash((self.strategy, self.domain, self.edges.tobytes()))

    def to_dict(self):
        return {
            "strategy": self.strategy.value,
            "edges": self.edges.tolist(),
            "domain": self.domain.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["edges"], dtype=float), Domain.from_dict(d["domain"]), d["strategy"])


@dataclass(frozen=True, eq=False)
class BinnedColumn:
    indices: np.ndarray
    spec: BinSpec

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.size and (idx.min() < 1 or idx.max() > self.spec.n_bins):
            raise InvalidParameterError("bin indices must lie in [1, b]")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return self.indices.size

    def counts(self) -> np.ndarray:
        return np.bincount(self.indices - 1, minlength=self.spec.n_bins)


@dataclass(frozen=True, eq=False)
class BinMixture:
    """Per-bin truncated-normal parameters fitted over one BinSpec."""

    means: np.ndarray
    stds: np.ndarray
    spec: BinSpec

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        stds = np.asarray(self.stds, dtype=float)
        if means.shape != (self.spec.n_bins,) or stds.shape != means.shape:
            raise InvalidParameterError("mixture needs one (mean, std) pair per bin")
        if np.any(stds < 0):
            raise InvalidParameterError("mixture standard deviations must be >= 0")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    def to_dict(self):
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}


def merge_edges(edges, domain: Domain, rtol: float = MERGE_RTOL) -> np.ndarray:
    """Sort interior edges and drop those closer than ``rtol * width`` to a kept one.

    The domain bounds always survive; interior edges too close to either
    bound are dropped.
    """
    tol = rtol * domain.width
    interior = np.sort(np.asarray(edges, dtype=float))
    interior = interior[(interior > domain.lo + tol) & (interior < domain.hi - tol)]
    kept = [domain.lo]
    for e in interior:
        if e - kept[-1] > tol:
            kept.append(float(e))
    kept.append(domain.hi)
    return np.asarray(kept)


def _clip_to(values, domain: Domain) -> np.ndarray:
    return np.clip(check_column(values, allow_empty=True), domain.lo, domain.hi)


# ---------------------------------------------------------------------------
# fitting


def fit_uniform(domain: Domain, b: int) -> BinSpec:
    """Equal-width bins; uses no data and no privacy budget."""
    b = check_n_bins(b)
    edges = domain.lo + np.arange(b + 1) * (domain.width / b)
    edges[-1] = domain.hi
    return BinSpec(edges, domain, BinStrategy.UNIFORM)


def _dp_quantile(aug, widths, ranks, alpha_n, eps_q, gen):
    positive = widths > 0
    dist = np.abs(ranks - alpha_n)
    if math.isinf(eps_q):
        best = dist[positive].min()
        weights = np.where(positive & (dist == best), widths, 0.0)
    else:
        logw = np.full(widths.shape, -np.inf)
        logw[positive] = np.log(widths[positive]) - eps_q * dist[positive]
        weights = np.exp(logw - logw.max())
    i = sample_weighted_index(weights, gen)
    return aug[i] + gen.random() * (aug[i + 1] - aug[i])


def fit_quantile_dp(values, domain: Domain, b: int, budget, rng=None) -> BinSpec:
    """Bin edges at DP estimates of the ``j/b`` quantiles.

    Each of the ``b - 1`` quantiles gets ``epsilon / b``. The sorted data is
    padded with the domain bounds; the gap between the ``i``-th and
    ``(i+1)``-th padded points is chosen with weight
    ``width * exp(-(epsilon / b) * |i - alpha * n|)`` and the edge is drawn
    uniformly inside it. Edges that coincide (to ``1e-9`` of the domain
    width) are merged, so fewer than ``b`` bins can come back on
    degenerate data.
    """
    b = check_n_bins(b)
    x = np.sort(_clip_to(values, domain))
    if x.size == 0:
        raise EmptyDataError("quantile discretizer needs at least one value")
    budget = check_budget(budget)
    if b == 1:
        return BinSpec(np.array([domain.lo, domain.hi]), domain, BinStrategy.QUANTILE)
    if budget.epsilon <= 0:
        raise InvalidParameterError("quantile discretizer needs epsilon > 0")
    gen = as_generator(rng)
    n = x.size
    aug = np.concatenate([[domain.lo], x, [domain.hi]])
    widths = np.diff(aug)
    ranks = np.arange(n + 1, dtype=float)
    eps_q = budget.epsilon / b
    edges = [_dp_quantile(aug, widths, ranks, (j / b) * n, eps_q, gen) for j in range(1, b)]
    return BinSpec(merge_edges(edges, domain), domain, BinStrategy.QUANTILE)


def _edges_from_centers(centers, domain: Domain) -> np.ndarray:
    c = np.sort(np.asarray(centers, dtype=float))
    mids = (c[1:] + c[:-1]) / 2.0
    return merge_edges(mids, domain)


def fit_kmeans_dp(values, domain: Domain, b: int, budget, rng=None, n_iter: int = 10) -> BinSpec:
    """1-d DP k-means; edges are midpoints between surviving centers.

    Centers start at the midpoints of ``b`` equal-width bins. Each of the
    ``n_iter`` Lloyd steps spends ``epsilon / n_iter``, half on
    two-sided geometric noise for the cluster counts and half on Laplace
    noise for the cluster sums (sensitivity ``hi - lo``, computed on values
    shifted to start at ``lo``). A cluster whose noisy count is not positive
    keeps its previous center; clusters with a non-positive final noisy count
    are dropped, which is how fewer than ``b`` bins arise.
    """
    b = check_n_bins(b)
    if n_iter < 1:
        raise InvalidParameterError("n_iter must be >= 1")
    budget = check_budget(budget)
    x = _clip_to(values, domain) - domain.lo
    width = domain.width
    if b == 1:
        return BinSpec(np.array([domain.lo, domain.hi]), domain, BinStrategy.KMEANS)
    noisy = not budget.is_infinite
    if noisy and budget.epsilon <= 0:
        raise InvalidParameterError("k-means discretizer needs epsilon > 0")
    gen = as_generator(rng)
    eps_half = budget.epsilon / n_iter / 2.0

    centers = (np.arange(b) + 0.5) * (width / b)
    final_counts = None
    for _ in range(n_iter):
        centers = np.sort(centers)
        boundaries = (centers[1:] + centers[:-1]) / 2.0
        labels = np.searchsorted(boundaries, x, side="right")
        counts = np.bincount(labels, minlength=b)
        sums = np.bincount(labels, weights=x, minlength=b)
        if noisy:
            counts = counts + geometric_noise(eps_half, gen, size=b)
            sums = sums + laplace_noise(width / eps_half, gen, size=b)
        alive = counts > 0
        updated = centers.copy()
        updated[alive] = np.clip(sums[alive] / counts[alive], 0.0, width)
        centers = updated
        final_counts = counts

    survivors = centers[final_counts > 0] + domain.lo
    return BinSpec(_edges_from_centers(survivors, domain), domain, BinStrategy.KMEANS)


def _interval_count(x_sorted, a, c, closed_right):
    left = np.searchsorted(x_sorted, a, side="left")
    right = np.searchsorted(x_sorted, c, side="right" if closed_right else "left")
    return int(right - left)


def fit_privtree(values, domain: Domain, b: int, budget, rng=None) -> BinSpec:
    """PrivTree over a 1-d domain with binary midpoint splits.

    A node at depth ``d`` with count ``c`` gets the biased count
    ``max(c - d*delta, tau - delta)`` plus Laplace(``lam``) noise, where
    ``lam = 3/epsilon``, ``delta = lam * ln 2`` and ``tau = n/b``. It is
    split when the noisy count exceeds ``tau`` and fewer than ``b`` leaves
    exist. Nodes are expanded breadth-first so the cap is shared evenly
    across the domain.
    """
    b = check_n_bins(b)
    budget = check_budget(budget)
    x = np.sort(_clip_to(values, domain))
    n = x.size
    if b == 1:
        return BinSpec(np.array([domain.lo, domain.hi]), domain, BinStrategy.PRIVTREE)
    noisy = not budget.is_infinite
    if noisy and budget.epsilon <= 0:
        raise InvalidParameterError("PrivTree needs epsilon > 0")
    gen = as_generator(rng)
    lam = 3.0 / budget.epsilon if noisy else 0.0
    delta = lam * math.log(2.0)
    tau = n / b
    min_width = _MIN_SPLIT_RWIDTH * domain.width

    leaves = []
    n_leaves = 1
    queue = deque([(domain.lo, domain.hi, 0)])
    while queue:
        a, c, depth = queue.popleft()
        if n_leaves >= b or (c - a) < 2 * min_width:
            leaves.append((a, c))
            continue
        count = _interval_count(x, a, c, closed_right=(c == domain.hi))
        biased = max(count - depth * delta, tau - delta)
        score = biased + (laplace_noise(lam, gen) if noisy else 0.0)
        if score > tau:
            mid = a + (c - a) / 2.0
            queue.append((a, mid, depth + 1))
            queue.append((mid, c, depth + 1))
            n_leaves += 1
        else:
            leaves.append((a, c))

    leaves.sort()
    edges = np.array([a for a, _ in leaves] + [domain.hi])
    return BinSpec(edges, domain, BinStrategy.PRIVTREE)


def fit_discretizer(strategy, values, domain: Domain, b: int, budget=None, rng=None, **kwargs) -> BinSpec:
    """Dispatch to one of the four fitting functions by name."""
    strategy = BinStrategy(strategy)
    if strategy is BinStrategy.UNIFORM:
        return fit_uniform(domain, b)
    if strategy is BinStrategy.QUANTILE:
        return fit_quantile_dp(values, domain, b, budget, rng)
    if strategy is BinStrategy.KMEANS:
        return fit_kmeans_dp(values, domain, b, budget, rng, **kwargs)
    if strategy is BinStrategy.PRIVTREE:
        return fit_privtree(values, domain, b, budget, rng)
    raise InvalidParameterError(f"{strategy.value!r} is not a fitted discretizer")


def categorical_spec(n_categories: int) -> BinSpec:
    """One unit-width bin per ordinal code ``0..K-1``."""
    k = check_n_bins(n_categories)
    domain = Domain(-0.5, k - 0.5)
    return BinSpec(np.arange(k + 1) - 0.5, domain, BinStrategy.CATEGORICAL)


# ---------------------------------------------------------------------------
# encoding and inverse sampling


def encode(values, spec: BinSpec) -> BinnedColumn:
    """Map values to 1-based bin indices; out-of-domain values are clamped."""
    x = check_column(values, allow_empty=True)
    idx = np.searchsorted(spec.edges, x, side="right")
    idx = np.clip(idx, 1, spec.n_bins)
    return BinnedColumn(idx, spec)


def decode_uniform(binned: BinnedColumn, rng=None) -> np.ndarray:
    lower, upper = binned.spec.bin_bounds(binned.indices)
    u = as_generator(rng).random(len(binned))
    out = lower + u * (upper - lower)
    # rounding in lower + u*w can reach the upper edge
    return np.minimum(out, np.nextafter(upper, -np.inf))


def decode_categorical(binned: BinnedColumn) -> np.ndarray:
    return (binned.indices - 1).astype(float)


def fit_mixture(values, binned: BinnedColumn, budget, rng=None) -> BinMixture:
    """DP per-bin mean and standard deviation for truncated-normal decoding.

    Count, sum and sum of squares of the values (clipped to their bin and
    shifted to start at the bin's lower edge) each get Laplace noise with
    ``epsilon / (3 b)``. Bins with a noisy count below one fall back to
    ``(midpoint, width / 4)``.
    """
    spec = binned.spec
    x = check_column(values, allow_empty=True)
    if x.size != len(binned):
        raise InvalidParameterError("values and binned column differ in length")
    budget = check_budget(budget)
    b = spec.n_bins
    lower, upper = spec.bin_bounds(binned.indices)
    shifted = np.clip(x, lower, upper) - lower
    labels = binned.indices - 1
    count = np.bincount(labels, minlength=b).astype(float)
    s1 = np.bincount(labels, weights=shifted, minlength=b)
    s2 = np.bincount(labels, weights=shifted**2, minlength=b)
    widths = spec.widths

    if not budget.is_infinite:
        if budget.epsilon <= 0:
            raise InvalidParameterError("mixture fitting needs epsilon > 0")
        gen = as_generator(rng)
        eps_stat = budget.epsilon / (3.0 * b)
        count = count + laplace_noise(1.0 / eps_stat, gen, size=b)
        s1 = s1 + laplace_noise(1.0, gen, size=b) * (widths / eps_stat)
        s2 = s2 + laplace_noise(1.0, gen, size=b) * (widths**2 / eps_stat)

    means = spec.edges[:-1] + widths / 2.0
    stds = widths / 4.0
    ok = count >= 1.0
    mean_shift = np.clip(s1[ok] / count[ok], 0.0, widths[ok])
    second = s2[ok] / count[ok]
    means = means.copy()
    stds = stds.copy()
    means[ok] = spec.edges[:-1][ok] + mean_shift
    stds[ok] = np.sqrt(np.maximum(second - mean_shift**2, 0.0))
    return BinMixture(means, stds, spec)


def decode_mixture(binned: BinnedColumn, mixture: BinMixture, rng=None) -> np.ndarray:
    """Sample each value from its bin's normal, truncated to the bin."""
    if mixture.spec != binned.spec:
        raise InvalidParameterError("mixture was fitted over a different BinSpec")
    gen = as_generator(rng)
    idx = binned.indices - 1
    lower, upper = binned.spec.bin_bounds(binned.indices)
    mean = mixture.means[idx]
    std = mixture.stds[idx]
    out = mean.copy()
    spread = std > 0
    if np.any(spread):
        s = std[spread]
        a = (lower[spread] - mean[spread]) / s
        c = (upper[spread] - mean[spread]) / s
        out[spread] = truncnorm.rvs(a, c, loc=mean[spread], scale=s, random_state=gen)
    # keep values in [e_i, e_{i+1}) so they re-encode to the same bin
    last = binned.indices == binned.spec.n_bins
    upper_open = np.where(last, upper, np.nextafter(upper, -np.inf))
    return np.clip(out, lower, upper_open)
