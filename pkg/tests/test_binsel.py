import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpdisc.binsel import (
    BinRule,
    bins_doane,
    bins_doane_from_values,
    bins_fdr,
    bins_rice,
    bins_rice_opt,
    bins_shimazaki,
    select_bins,
)
from dpdisc.exceptions import DegenerateDataWarning, InvalidParameterError
from dpdisc.mechanisms import SeededRng


def test_doane():
    assert bins_doane(1024, 0.0).b == 11
    with pytest.raises(InvalidParameterError):
        bins_doane(2, 0.5)
    sigma = math.sqrt(6 * 998 / (1001 * 1003))
    assert bins_doane(1000, 1.0).b == math.ceil(1 + math.log2(1000) + math.log2(1 + 1 / sigma))
    assert bins_doane_from_values(np.full(10, 2.0)).b == bins_doane(10, 0.0).b


@pytest.mark.parametrize("n,b", [(1000, 20), (8, 4), (1, 2)])
def test_rice(n, b):
    assert bins_rice(n).b == b


def test_rice_rejects_zero():
    with pytest.raises(InvalidParameterError):
        bins_rice(0)


def test_fdr():
    x = np.linspace(0, 1, 1000)
    assert bins_fdr(x).b == 10
    with pytest.warns(DegenerateDataWarning):
        r = bins_fdr(np.full(1000, 3.0))
    assert r.fallback and r.b == 20

    z = SeededRng(0).generator.standard_normal(10_000)
    q75, q25 = np.percentile(z, [75, 25])
    expected = math.ceil((z.max() - z.min()) / (2 * (q75 - q25) / 10_000 ** (1 / 3)))
    assert bins_fdr(z).b == expected


def test_shimazaki():
    z = SeededRng(1).generator.standard_normal(10_000)
    assert bins_shimazaki(z, [7]).b == 7
    # brute-force scan of the cost function
    lo, hi = z.min(), z.max()
    best, best_cost = None, math.inf
    for b in range(2, 101):
        k = [0] * b
        for v in z:
            k[min(int((v - lo) / (hi - lo) * b), b - 1)] += 1
        mean = sum(k) / b
        var = sum((c - mean) ** 2 for c in k) / b
        cost = (2 * mean - var) / ((hi - lo) / b) ** 2
        if cost < best_cost - 1e-9 * abs(best_cost) if best_cost != math.inf else True:
            best, best_cost = b, cost
    assert bins_shimazaki(z).b == best


def test_shimazaki_tie_prefers_smaller():
    # b=1: k=4, v=0, h=1 -> 8; b=4: counts (3,0,0,1), k=1, v=1.5, h=1/4 -> 8
    x = np.array([0.0, 0.0, 0.0, 1.0])
    assert bins_shimazaki(x, [4, 1]).b == 1
    assert bins_shimazaki(np.array([0.0, 0.0]), [3, 5]).b == 3  # constant data: all costs infinite


def test_rice_opt():
    assert bins_rice_opt(1000, math.inf).b == 20
    assert bins_rice_opt(1000, 0.0).b == 10
    assert bins_rice_opt(1000, 1.0).b == 15
    grid = np.linspace(0, 20, 50)
    bs = [bins_rice_opt(1000, e).b for e in grid]
    assert all(a <= b for a, b in zip(bs, bs[1:]))
    with pytest.raises(InvalidParameterError):
        bins_rice_opt(1000, -1)


def test_select_bins():
    assert select_bins(20).strategy is BinRule.FIXED
    assert select_bins("rice", n=1000).b == 20
    assert select_bins("rice_opt", n=1000, epsilon="inf").b == 20
    with pytest.raises(InvalidParameterError):
        select_bins("rice_opt", n=1000)
    with pytest.raises(InvalidParameterError):
        select_bins("doane", n=100)
    with pytest.raises(ValueError):
        select_bins("sturges", n=10)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 10**7), e1=st.floats(0, 50), e2=st.floats(0, 50))
def test_rice_opt_bounds_and_monotone(n, e1, e2):
    lo, hi = sorted((e1, e2))
    a, b = bins_rice_opt(n, lo).b, bins_rice_opt(n, hi).b
    assert a <= b
    assert bins_rice_opt(n, 0).b <= a and b <= bins_rice(n).b
