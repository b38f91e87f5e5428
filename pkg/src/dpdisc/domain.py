"""Column domain ``[lo, hi]``: provided, read raw from the data, or estimated under DP."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_budget, check_column
from .exceptions import ExtractionFailedError, InvalidParameterError, OutOfRangeError
from .mechanisms import laplace_noise


class DomainSource(str, enum.Enum):
    PROVIDED = "provided"
    RAW = "raw"
    DP = "dp"


@dataclass(frozen=True)
class Domain:
    lo: float
    hi: float
    source: DomainSource = DomainSource.PROVIDED

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InvalidParameterError("domain bounds must be finite")
        if not lo < hi:
            raise InvalidParameterError(f"domain needs lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "source", DomainSource(self.source))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x >= self.lo) & (x <= self.hi)

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "source": self.source.value}

    @classmethod
    def from_dict(cls, d):
        return cls(d["lo"], d["hi"], DomainSource(d.get("source", "provided")))


def provided_domain(lo, hi) -> Domain:
    return Domain(lo, hi, DomainSource.PROVIDED)


def extract_domain_raw(values) -> Domain:
    """Min/max of the data. Not private. Constant columns are widened by 0.5."""
    x = check_column(values)
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return Domain(lo, hi, DomainSource.RAW)


def exponential_edges(m: int = 32) -> np.ndarray:
    """Edges ``-2^m, ..., -1, 0, 1, ..., 2^m`` of the 2(m+1) range bins."""
    pos = 2.0 ** np.arange(0, m + 1)
    return np.concatenate([-pos[::-1], [0.0], pos])


def _exponential_bin_counts(x: np.ndarray, m: int) -> np.ndarray:
    # Bin k (0-based) of 2(m+1) covers [edges[k], edges[k+1]); negatives mirror
    # the positive side so that e.g. -4 and 4 land in symmetric bins.
    n_side = m + 1
    mag = np.abs(x)
    side_idx = np.zeros(x.shape, dtype=np.int64)
    nz = mag >= 1.0
    side_idx[nz] = np.floor(np.log2(mag[nz])).astype(np.int64) + 1
    side_idx = np.minimum(side_idx, m)  # |x| == 2^m closes the outermost bin
    pos = x >= 0
    idx = np.where(pos, n_side + side_idx, n_side - 1 - side_idx)
    return np.bincount(idx, minlength=2 * n_side)


def extract_domain_dp(values, epsilon, m: int = 32, rng=None, p_fail: float = 1e-9) -> Domain:
    """Estimate ``[lo, hi]`` from a noisy histogram over an exponential range.

    Counts in the 2(m+1) bins with edges ``0, ±1, ±2, ..., ±2^m`` get
    Laplace(1/epsilon) noise. The threshold starts at
    ``ln(2(m+1)/p_fail)/epsilon`` and is halved until some noisy count
    exceeds it; the outermost edges of the exceeding bins are returned.

    Halving stops at ``max(1, ln(2(m+1))/epsilon)``: below that level a
    bin holding only noise is about as likely to exceed as not, so the
    result would be dominated by noise.

    Raises
    ------
    ExtractionFailedError
        If the threshold reaches the floor before any bin exceeds it.
    OutOfRangeError
        If any ``|value| > 2^m``.
    """
    x = check_column(values, allow_empty=True)
    budget = check_budget(epsilon)
    if budget.epsilon <= 0:
        raise InvalidParameterError("DP domain extraction needs epsilon > 0")
    if m < 1:
        raise InvalidParameterError("m must be >= 1")
    bound = 2.0**m
    if x.size and np.max(np.abs(x)) > bound:
        raise OutOfRangeError(f"values exceed the ±2^{m} extraction range")

    edges = exponential_edges(m)
    counts = _exponential_bin_counts(x, m).astype(float)
    n_bins = counts.size
    if budget.is_infinite:
        noisy = counts
        threshold, floor = 0.0, 1.0
    else:
        noisy = counts + laplace_noise(1.0 / budget.epsilon, rng, size=n_bins)
        threshold = math.log(n_bins / p_fail) / budget.epsilon
        floor = max(1.0, math.log(n_bins) / budget.epsilon)

    while True:
        above = np.flatnonzero(noisy > threshold)
        if above.size:
            break
        if threshold < floor:
            raise ExtractionFailedError(
                "no bin of the noisy range histogram exceeded the threshold; "
                "epsilon is likely too small for this data"
            )
        threshold /= 2.0

    lo, hi = edges[above[0]], edges[above[-1] + 1]
    return Domain(lo, hi, DomainSource.DP)


def resolve_domain(values, strategy, *, bounds=None, epsilon=None, rng=None, m=32) -> Domain:
    """Dispatch on ``strategy`` ('provided', 'raw' or 'dp')."""
    strategy = DomainSource(strategy)
    if strategy is DomainSource.PROVIDED:
        if bounds is None:
            raise InvalidParameterError("a provided domain needs explicit bounds")
        if isinstance(bounds, Domain):
            return Domain(bounds.lo, bounds.hi, DomainSource.PROVIDED)
        lo, hi = bounds
        return Domain(lo, hi, DomainSource.PROVIDED)
    if strategy is DomainSource.RAW:
        return extract_domain_raw(values)
    if epsilon is None:
        raise InvalidParameterError("DP domain extraction needs a budget")
    return extract_domain_dp(values, epsilon, m=m, rng=rng)


__all__ = [
    "Domain",
    "DomainSource",
    "extract_domain_dp",
    "extract_domain_raw",
    "exponential_edges",
    "provided_domain",
    "resolve_domain",
]
