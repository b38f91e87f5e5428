"""Rules for choosing the number of bins.

Only :func:`bins_rice` and :func:`bins_rice_opt` are data independent and
therefore safe inside a DP pipeline; the other rules read the raw data.
"""
from __future__ import annotations

import enum
import math
import numbers
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import skew

from ._validation import check_column, check_n_bins, parse_epsilon
from .exceptions import DegenerateDataWarning, InvalidParameterError


class BinRule(str, enum.Enum):
    DOANE = "doane"
    RICE = "rice"
    FDR = "fdr"
    SHIMAZAKI = "shimazaki"
    RICE_OPT = "rice_opt"
    FIXED = "fixed"


@dataclass(frozen=True)
class BinCount:
    b: int
    strategy: BinRule
    fallback: bool = False

    def __post_init__(self):
        check_n_bins(self.b)
        object.__setattr__(self, "strategy", BinRule(self.strategy))

    def __int__(self):
        return self.b


def _ceil(x: float) -> int:
    # absorb float noise such as 10.000000000000002
    return max(1, math.ceil(x * (1.0 - 1e-12)))


def _round_half_up(x: float) -> int:
    return max(1, math.floor(x + 0.5))


def bins_doane(n: int, skewness: float) -> BinCount:
    if n < 3:
        raise InvalidParameterError("Doane's formula needs n >= 3")
    sigma = math.sqrt(6.0 * (n - 2) / ((n + 1) * (n + 3)))
    b = 1.0 + math.log2(n) + math.log2(1.0 + abs(skewness) / sigma)
    return BinCount(_ceil(b), BinRule.DOANE)


def bins_doane_from_values(values) -> BinCount:
    x = check_column(values)
    g1 = float(skew(x)) if np.ptp(x) > 0 else 0.0
    return bins_doane(x.size, g1)


def bins_rice(n: int) -> BinCount:
    if n < 1:
        raise InvalidParameterError("Rice rule needs n >= 1")
    return BinCount(_round_half_up(2.0 * float(np.cbrt(n))), BinRule.RICE)


def bins_fdr(values) -> BinCount:
    """Freedman-Diaconis; zero IQR falls back to the Rice rule with a warning."""
    x = check_column(values)
    q75, q25 = np.percentile(x, [75, 25])
    iqr = q75 - q25
    if iqr <= 0:
        warnings.warn("IQR is zero; falling back to the Rice rule", DegenerateDataWarning, stacklevel=2)
        return BinCount(bins_rice(x.size).b, BinRule.FDR, fallback=True)
    h = 2.0 * iqr / float(np.cbrt(x.size))
    return BinCount(_ceil(np.ptp(x) / h), BinRule.FDR)


def shimazaki_costs(values, candidates) -> np.ndarray:
    """Cost ``(2 k - v) / h^2`` for each candidate bin count."""
    x = check_column(values)
    lo, hi = float(x.min()), float(x.max())
    span = hi - lo
    costs = []
    for b in candidates:
        b = check_n_bins(b)
        if span == 0:
            costs.append(np.inf)
            continue
        counts, _ = np.histogram(x, bins=b, range=(lo, hi))
        k = counts.mean()
        v = np.mean((counts - k) ** 2)
        h = span / b
        costs.append((2.0 * k - v) / h**2)
    return np.asarray(costs, dtype=float)


def bins_shimazaki(values, candidates=None) -> BinCount:
    if candidates is None:
        candidates = range(2, 101)
    candidates = [check_n_bins(b) for b in candidates]
    if not candidates:
        raise InvalidParameterError("need at least one candidate bin count")
    costs = shimazaki_costs(values, candidates)
    best = min(range(len(candidates)), key=lambda i: (costs[i], candidates[i]))
    return BinCount(candidates[best], BinRule.SHIMAZAKI)


def bins_rice_opt(n: int, epsilon) -> BinCount:
    """Rice rule shrunk by ``1 + exp(-epsilon)``: between half of Rice (eps=0) and Rice (eps=inf)."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    epsilon = parse_epsilon(epsilon)
    if math.isnan(epsilon) or epsilon < 0:
        raise InvalidParameterError("epsilon must be >= 0")
    b = 2.0 * float(np.cbrt(n)) / (1.0 + math.exp(-epsilon))
    return BinCount(_round_half_up(b), BinRule.RICE_OPT)


PRIVATE_SAFE = frozenset({BinRule.RICE, BinRule.RICE_OPT, BinRule.FIXED})


def select_bins(rule, *, values=None, n=None, epsilon=None) -> BinCount:
    """Resolve a harness bin setting: an integer or one of the rule names."""
    if isinstance(rule, numbers.Integral) and not isinstance(rule, bool):
        return BinCount(int(rule), BinRule.FIXED)
    if isinstance(rule, str) and rule.isdigit():
        return BinCount(int(rule), BinRule.FIXED)
    rule = BinRule(rule)
    if n is None and values is not None:
        n = np.asarray(values).size
    if rule is BinRule.RICE:
        return bins_rice(n)
    if rule is BinRule.RICE_OPT:
        if epsilon is None:
            raise InvalidParameterError("rice_opt needs epsilon")
        return bins_rice_opt(n, epsilon)
    if values is None:
        raise InvalidParameterError(f"{rule.value} needs the data values")
    if rule is BinRule.DOANE:
        return bins_doane_from_values(values)
    if rule is BinRule.FDR:
        return bins_fdr(values)
    if rule is BinRule.SHIMAZAKI:
        return bins_shimazaki(values)
    raise InvalidParameterError(f"unknown bin rule {rule!r}")
