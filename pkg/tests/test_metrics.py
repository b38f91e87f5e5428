import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpdisc.discretizers import fit_uniform
from dpdisc.domain import Domain
from dpdisc.exceptions import DegenerateDataWarning, EmptyDataError, InvalidParameterError, UndefinedRatioError
from dpdisc.mechanisms import SeededRng
from dpdisc.metrics import (
    LogisticRegressionGD,
    MetricReport,
    aggregate,
    correlation_similarity,
    discriminator_similarity,
    max_percentile_distance,
    mean_percentile_distance,
    predictive_utility,
    query_similarity,
    query_similarity_binned,
    record_similarity,
)


# --- query similarity oracles -----------------------------------------------------


def _brute_score(Ia, Is, cols, subsets):
    ca = sum(1 for row in Ia if all(row[c] in s for c, s in zip(cols, subsets)))
    cs = sum(1 for row in Is if all(row[c] in s for c, s in zip(cols, subsets)))
    return Fraction(1) if max(ca, cs) == 0 else Fraction(min(ca, cs), max(ca, cs))


def _nonempty_subsets(b):
    items = range(1, b + 1)
    return [frozenset(c) for r in range(1, b + 1) for c in itertools.combinations(items, r)]


def qs_exhaustive_oracle(Ia, Is, n_bins, dims):
    per_dim = []
    d = len(n_bins)
    for k in dims:
        if k > d:
            continue
        scores = [
            _brute_score(Ia, Is, cols, subsets)
            for cols in itertools.combinations(range(d), k)
            for subsets in itertools.product(*[_nonempty_subsets(n_bins[c]) for c in cols])
        ]
        per_dim.append(sum(scores) / len(scores))
    return sum(per_dim) / len(per_dim)


def qs_sampled_oracle(Ia, Is, n_bins, n_queries, dims, gen):
    """Replays the sampler's draws and looks every query up in the brute-force table."""
    d = len(n_bins)
    per_dim = []
    for k in [k for k in dims if 1 <= k <= d]:
        total = Fraction(0)
        for _ in range(n_queries):
            cols = sorted(gen.choice(d, size=k, replace=False).tolist())
            subsets = []
            for c in cols:
                while True:
                    pick = frozenset((np.flatnonzero(gen.random(n_bins[c]) < 0.5) + 1).tolist())
                    if pick:
                        break
                subsets.append(pick)
            total += _brute_score(Ia, Is, cols, subsets)
        per_dim.append(total / n_queries)
    return sum(per_dim) / len(per_dim)


def random_toy(gen):
    d = int(gen.integers(1, 3))
    n_bins = [int(gen.integers(1, 4)) for _ in range(d)]
    na, ns = int(gen.integers(0, 9)), int(gen.integers(0, 9))
    Ia = np.column_stack([gen.integers(1, b + 1, na) for b in n_bins]) if na else np.empty((0, d), int)
    Is = np.column_stack([gen.integers(1, b + 1, ns) for b in n_bins]) if ns else np.empty((0, d), int)
    return Ia, Is, n_bins


def test_qs_four_row_toy_exhaustive():
    Ia = np.array([[1], [1], [2], [2]])
    Is = np.array([[1], [2], [2], [2]])
    # queries {1}: 2 vs 1 -> 1/2; {2}: 2 vs 3 -> 2/3; {1,2}: 4 vs 4 -> 1
    expected = (Fraction(1, 2) + Fraction(2, 3) + 1) / 3
    got = query_similarity_binned(Ia, Is, [2], dims=(1,), universe=True)
    assert got == pytest.approx(float(expected), abs=1e-15)


def test_qs_examples():
    x = SeededRng(0).generator.uniform(0, 1, (300, 3))
    specs = [fit_uniform(Domain(0, 1), 5)] * 3
    assert query_similarity(x, x, specs, rng=SeededRng(1)) == 1.0
    Ia = np.ones((5, 1), int)
    Is = np.full((5, 1), 2)
    # every query containing bin 1 but not 2 or vice versa scores 0; {1,2} scores 1
    assert query_similarity_binned(Ia, Is, [2], dims=(1,), universe=True) == pytest.approx(1 / 3)


def test_qs_disjoint_supports():
    # every query counts (c, 0) with c > 0
    Ia = np.ones((4, 2), int)
    Is = np.empty((0, 2), int)
    assert query_similarity_binned(Ia, Is, [1, 1], dims=(1, 2), rng=SeededRng(0)) == 0.0


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_qs_sampled_and_universe_match_oracles(seed):
    gen = SeededRng(seed).generator
    Ia, Is, n_bins = random_toy(gen)
    dims = (1, 2)
    exact = qs_exhaustive_oracle(Ia, Is, n_bins, dims)
    assert query_similarity_binned(Ia, Is, n_bins, dims=dims, universe=True) == pytest.approx(float(exact), abs=1e-12)
    sampled = query_similarity_binned(Ia, Is, n_bins, n_queries=30, dims=dims, rng=SeededRng(seed, 1))
    replay = qs_sampled_oracle(Ia, Is, n_bins, 30, dims, SeededRng(seed, 1).generator)
    assert sampled == pytest.approx(float(replay), abs=1e-12)


# --- record similarity and MPD ---------------------------------------------------------


def test_record_similarity_examples():
    a = np.array([[0.0], [10.0], [5.0], [5.0]])
    assert record_similarity(a, a, [(0, 10)]) == 1.0
    assert record_similarity(np.zeros((3, 1)), np.full((3, 1), 10.0), [(0, 10)]) == 0.0
    half = np.array([[0.0], [0.0]])
    assert record_similarity(half, np.array([[0.0], [10.0]]), [(0, 10)]) == pytest.approx(0.5)
    with pytest.raises(InvalidParameterError):
        record_similarity(a, a[:2], [(0, 10)])


def test_mpd_examples():
    x = np.linspace(0, 10, 1001)
    assert max_percentile_distance(x, x) == 1.0
    # point masses at the two ends of the joint range are a full range apart
    assert max_percentile_distance(np.zeros(50), np.ones(50)) == 0.0
    # a shift of 1 on a joint range of 11 is 1/11 after scaling
    assert abs(max_percentile_distance(x, x + 1) - 0.9) <= 0.01
    with pytest.raises(EmptyDataError):
        max_percentile_distance([], x)
    assert mean_percentile_distance(np.c_[x, x], np.c_[x, x + 10]) == pytest.approx(0.75)


# --- discriminator ------------------------------------------------------------------


def test_ds_identical_constant_data_is_one():
    a = np.ones((200, 2))
    assert discriminator_similarity(a, a.copy(), rng=SeededRng(0)) == pytest.approx(1.0)


def test_ds_separable_is_near_zero():
    gen = SeededRng(1).generator
    a = gen.normal(0, 1, (400, 2))
    s = gen.normal(50, 1, (400, 2))
    assert discriminator_similarity(a, s, rng=SeededRng(2)) < 0.05


def test_ds_bootstrap_resample():
    gen = SeededRng(3).generator
    a = gen.normal(0, 1, (2000, 3))
    s = a[gen.integers(0, 2000, 2000)]
    assert discriminator_similarity(a, s, rng=SeededRng(4)) >= 0.9
    holdout = gen.normal(0, 1, (500, 3))
    assert discriminator_similarity(a, s, holdout, rng=SeededRng(4)) >= 0.9


def test_ds_needs_rows():
    with pytest.raises(InvalidParameterError):
        discriminator_similarity(np.ones((1, 1)), np.ones((1, 1)), rng=SeededRng(0))


# --- correlation ------------------------------------------------------------------------


def _with_corr(r, n=500, seed=0):
    gen = SeededRng(seed).generator
    q, _ = np.linalg.qr(gen.standard_normal((n, 2)) - 0)
    x, z = q[:, 0] - q[:, 0].mean(), q[:, 1] - q[:, 1].mean()
    z -= x * (x @ z) / (x @ x)
    x, z = x / np.linalg.norm(x), z / np.linalg.norm(z)
    return np.c_[x, r * x + math.sqrt(1 - r * r) * z]


def test_cs_examples():
    a = _with_corr(0.5)
    assert correlation_similarity(a, a) == pytest.approx(1.0)
    expected = (2 * 1.0 + 2 * (0.625 / 0.75)) / 4
    assert correlation_similarity(a, _with_corr(0.25, seed=1)) == pytest.approx(expected, abs=1e-9)


def test_cs_constant_column_warns():
    a = _with_corr(0.5)
    s = a.copy()
    s[:, 1] = 3.0
    with pytest.warns(DegenerateDataWarning):
        v = correlation_similarity(a, s)
    assert v == pytest.approx((2 + 2 * 0.5 / 0.75) / 4)
    with pytest.raises(InvalidParameterError):
        correlation_similarity(a[:, :1], a[:, :1])


# --- predictive utility -------------------------------------------------------------------


def _labelled(n, seed):
    gen = SeededRng(seed).generator
    X = gen.normal(0, 1, (n, 3))
    y = (X[:, 0] + 0.5 * X[:, 1] + 0.3 * gen.standard_normal(n) > 0).astype(float)
    return np.c_[X, y]


def test_pu_examples():
    train, test = _labelled(1000, 0), _labelled(500, 1)
    assert predictive_utility(train, train, test, 3) == 1.0
    zero = train.copy()
    zero[:, 3] = 0
    assert predictive_utility(train, zero, test, 3) == 0.0
    shuffled = train.copy()
    shuffled[:, 3] = SeededRng(2).generator.permutation(shuffled[:, 3])
    pu = predictive_utility(train, shuffled, test, 3)
    assert pu < 0.9


def test_pu_undefined_ratio():
    train, test = _labelled(200, 3), _labelled(100, 4)
    train[:, 3] = 0
    with pytest.raises(UndefinedRatioError):
        predictive_utility(train, train, test, 3)


# --- aggregate and LR ---------------------------------------------------------------------------


def test_aggregate_examples():
    assert aggregate({"mpd": 0.8, "ds": 0.6}).aggregate == pytest.approx(0.7)
    assert aggregate({"qs": 0.4}).aggregate == pytest.approx(0.4)
    rep = aggregate({"rs": 0.9, "mpd": 0.8, "ds": 0.7, "qs": 0.6})
    assert rep.aggregate == pytest.approx(0.75) and set(rep.scores()) == {"rs", "mpd", "ds", "qs"}
    with pytest.raises(EmptyDataError):
        aggregate({})
    with pytest.raises(InvalidParameterError):
        aggregate({"bleu": 0.5})
    with pytest.raises(InvalidParameterError):
        MetricReport(rs=1.5)


def test_lr_gradient_matches_finite_differences():
    gen = SeededRng(5).generator
    X = gen.normal(0, 1, (50, 4))
    y = (gen.random(50) < 0.4).astype(float)
    w, b = gen.normal(0, 0.5, 4), 0.3
    gw, gb = LogisticRegressionGD.grad(w, b, X, y)
    h = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fd = (LogisticRegressionGD.loss(w + e, b, X, y) - LogisticRegressionGD.loss(w - e, b, X, y)) / (2 * h)
        assert fd == pytest.approx(gw[j], abs=1e-7)
    fd_b = (LogisticRegressionGD.loss(w, b + h, X, y) - LogisticRegressionGD.loss(w, b - h, X, y)) / (2 * h)
    assert fd_b == pytest.approx(gb, abs=1e-7)


def test_lr_learns_and_is_deterministic():
    data = _labelled(500, 6)
    X, y = data[:, :3], data[:, 3]
    a = LogisticRegressionGD().fit(X, y)
    b = LogisticRegressionGD().fit(X, y)
    assert np.array_equal(a.coef_, b.coef_)
    assert np.mean(a.predict(X) == y) > 0.85


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(4, 60), d=st.integers(2, 4))
def test_metric_ranges(seed, n, d):
    gen = SeededRng(seed).generator
    a, s = gen.normal(0, 1, (n, d)), gen.normal(0.5, 2, (n, d))
    specs = [fit_uniform(Domain(-8, 8), 6)] * d
    with np.errstate(all="ignore"):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateDataWarning)
            vals = [
                mean_percentile_distance(a, s),
                record_similarity(a, s, [(-8, 8)] * d),
                discriminator_similarity(a, s, rng=SeededRng(seed)),
                query_similarity(a, s, specs, n_queries=20, rng=SeededRng(seed)),
                correlation_similarity(a, s),
            ]
    assert all(0.0 <= v <= 1.0 for v in vals)
