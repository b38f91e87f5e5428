"""Controlled test distributions, a Wine-like tabular generator and CSV I/O."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..exceptions import InvalidParameterError, ParseError
from ..mechanisms import as_generator

TARGET = (-10.0, 10.0)
CONTROLLED_SIZES = (500, 1000, 10000, 100000)


class Distribution(str, enum.Enum):
    UNIFORM = "uniform"
    MONOTONE = "monotone"
    NORMAL = "normal"
    BETA = "beta"
    MIXTURE = "mixture"
    IMBALANCED = "imbalanced"


# The five used in the benchmarks; uniform is only for illustration.
BENCHMARK_DISTRIBUTIONS = ("monotone", "normal", "beta", "mixture", "imbalanced")

# Support before rescaling: the true support for bounded laws, otherwise
# four standard deviations beyond the outermost component mean.
ENVELOPES = {
    Distribution.UNIFORM: (0.0, 1.0),
    Distribution.MONOTONE: (0.0, 1.0),
    Distribution.NORMAL: (-4.0, 4.0),
    Distribution.BETA: (0.0, 1.0),
    Distribution.MIXTURE: (2.0 - 4.0, 9.0 + 4.0),
    Distribution.IMBALANCED: (0.0 - 4.0, 10.0 + 4.0),
}


@dataclass(frozen=True)
class ControlledSpec:
    name: str
    n: int
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "name", Distribution(str(self.name).lower()).value)
        except ValueError:
            raise InvalidParameterError(f"unknown distribution {self.name!r}") from None
        if int(self.n) < 1:
            raise InvalidParameterError("n must be >= 1")


def sample_controlled_raw(name, n: int, rng=None) -> np.ndarray:
    """Draw from the named law without clipping or rescaling."""
    dist = Distribution(str(name).lower())
    gen = as_generator(rng)
    if dist is Distribution.UNIFORM:
        return gen.random(n)
    if dist is Distribution.MONOTONE:
        return np.sqrt(gen.random(n))
    if dist is Distribution.NORMAL:
        return gen.normal(0.0, 1.0, n)
    if dist is Distribution.BETA:
        return gen.beta(2.0, 14.0, n)
    if dist is Distribution.MIXTURE:
        mu = np.where(gen.random(n) < 0.5, 2.0, 9.0)
        return gen.normal(mu, 1.0)
    mu = np.where(gen.random(n) < 0.95, 0.0, 10.0)
    return gen.normal(mu, 1.0)


def rescale(x, envelope, target=TARGET) -> np.ndarray:
    """Clip to ``envelope`` and map it affinely onto ``target``."""
    lo, hi = envelope
    a, b = target
    x = np.clip(np.asarray(x, dtype=float), lo, hi)
    return np.clip(a + (x - lo) * (b - a) / (hi - lo), a, b)


def gen_controlled(spec: ControlledSpec, rng=None) -> np.ndarray:
    """Samples of ``spec.name`` clipped to its envelope and rescaled into [-10, 10]."""
    gen = as_generator(rng if rng is not None else spec.seed)
    x = sample_controlled_raw(spec.name, int(spec.n), gen)
    return rescale(x, ENVELOPES[Distribution(spec.name)])


# ---------------------------------------------------------------------------
# Wine-like data

# name, marginal ('normal' | 'lognormal'), mean, std, lo, hi of ordinary records
WINE_COLUMNS = (
    ("fixed_acidity", "normal", 6.85, 0.84, 3.8, 14.2),
    ("volatile_acidity", "lognormal", 0.278, 0.10, 0.08, 1.1),
    ("citric_acid", "normal", 0.334, 0.121, 0.0, 1.66),
    ("residual_sugar", "lognormal", 6.39, 5.07, 0.6, 31.6),
    ("chlorides", "lognormal", 0.0458, 0.0218, 0.009, 0.346),
    ("free_sulfur_dioxide", "lognormal", 35.3, 17.0, 2.0, 146.5),
    ("total_sulfur_dioxide", "normal", 138.4, 42.5, 9.0, 366.5),
    ("density", "normal", 0.994, 0.003, 0.987, 1.039),
    ("pH", "normal", 3.19, 0.151, 2.72, 3.82),
    ("sulphates", "normal", 0.49, 0.114, 0.22, 1.08),
    ("alcohol", "normal", 10.51, 1.23, 8.0, 14.2),
)
WINE_TARGET = {"free_sulfur_dioxide": 289.0, "total_sulfur_dioxide": 440.0}

# Rough latent correlations (last row/column: wine quality).
_WINE_CORR = {
    ("residual_sugar", "density"): 0.8,
    ("alcohol", "density"): -0.75,
    ("residual_sugar", "alcohol"): -0.45,
    ("free_sulfur_dioxide", "total_sulfur_dioxide"): 0.6,
    ("total_sulfur_dioxide", "density"): 0.5,
    ("fixed_acidity", "pH"): -0.43,
    ("fixed_acidity", "citric_acid"): 0.3,
    ("residual_sugar", "total_sulfur_dioxide"): 0.4,
    ("alcohol", "quality"): 0.45,
    ("density", "quality"): -0.3,
    ("volatile_acidity", "quality"): -0.2,
    ("chlorides", "quality"): -0.2,
}


def _wine_corr() -> np.ndarray:
    names = [c[0] for c in WINE_COLUMNS] + ["quality"]
    pos = {n: i for i, n in enumerate(names)}
    R = np.eye(len(names))
    for (a, b), r in _WINE_CORR.items():
        R[pos[a], pos[b]] = R[pos[b], pos[a]] = r
    # project onto the PSD cone, then back to unit diagonal
    w, V = np.linalg.eigh(R)
    R = (V * np.maximum(w, 1e-6)) @ V.T
    d = np.sqrt(np.diag(R))
    return R / np.outer(d, d)


def wine_like(n: int = 4898, rng=None, label: bool = True, plant_target: bool = False) -> dict:
    """Synthetic stand-in for the white-wine quality table.

    Eleven physico-chemical columns drawn through a Gaussian copula with
    normal or log-normal marginals, clipped to realistic ranges, and a binary
    ``label`` (quality >= 7, about a fifth of the rows). With
    ``plant_target`` the last record gets free/total sulfur dioxide of
    289/440, beyond every other record, and median values elsewhere.
    """
    if n < 2:
        raise InvalidParameterError("n must be >= 2")
    gen = as_generator(rng)
    R = _wine_corr()
    Z = gen.multivariate_normal(np.zeros(R.shape[0]), R, size=n, method="cholesky")
    out = {}
    for j, (name, kind, mean, sd, lo, hi) in enumerate(WINE_COLUMNS):
        z = Z[:, j]
        if kind == "lognormal":
            s2 = math.log1p((sd / mean) ** 2)
            x = np.exp(math.log(mean) - s2 / 2 + math.sqrt(s2) * z)
        else:
            x = mean + sd * z
        out[name] = np.clip(x, lo, hi)
    if plant_target:
        for name in out:
            out[name][-1] = WINE_TARGET.get(name, float(np.median(out[name][:-1])))
    if label:
        out["label"] = (Z[:, -1] > np.quantile(Z[:, -1], 0.784)).astype(float)
        if plant_target:
            out["label"][-1] = 0.0
    return out


# ---------------------------------------------------------------------------
# CSV


@dataclass
class Table:
    """Named float columns plus the bookkeeping needed to write them back."""

    columns: dict
    categorical: list = field(default_factory=list)
    encodings: dict = field(default_factory=dict)
    label: Optional[str] = None

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def names(self) -> list:
        return list(self.columns)

    def matrix(self, names=None) -> np.ndarray:
        names = self.names if names is None else names
        return np.column_stack([self.columns[n] for n in names])

    def roles(self) -> dict:
        return {
            n: "label" if n == self.label else "categorical" if n in self.categorical else "numeric"
            for n in self.columns
        }


def _is_number(s: str) -> bool:
    try:
        return math.isfinite(float(s))
    except ValueError:
        return False


def load_csv(path, label: Optional[str] = None) -> Table:
    """Read a header-first UTF-8 CSV.

    A column whose first value parses as a number is numeric and every later
    value must parse too; other columns are ordinal-encoded in order of first
    appearance.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", line=1)
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header) or any(not h for h in header):
        raise ParseError("header names must be unique and non-empty", line=1)
    body = [(i + 2, r) for i, r in enumerate(rows[1:]) if r]
    if not body:
        raise ParseError("no data rows", line=2)
    for line, r in body:
        if len(r) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(r)}", line=line)

    columns, categorical, encodings = {}, [], {}
    for j, name in enumerate(header):
        raw = [(line, r[j].strip()) for line, r in body]
        if _is_number(raw[0][1]):
            vals = np.empty(len(raw))
            for k, (line, s) in enumerate(raw):
                if not _is_number(s):
                    raise ParseError(f"cannot parse {s!r} as a number", line=line, column=name)
                vals[k] = float(s)
        else:
            codes: dict = {}
            vals = np.array([codes.setdefault(s, len(codes)) for _, s in raw], dtype=float)
            categorical.append(name)
            encodings[name] = list(codes)
        columns[name] = vals

    if label is not None:
        if label not in columns:
            raise InvalidParameterError(f"label column {label!r} not in {header}")
        if not np.isin(columns[label], (0.0, 1.0)).all():
            raise InvalidParameterError(f"label column {label!r} must be binary 0/1")
    return Table(columns, categorical, encodings, label)


def write_csv(path, columns: dict, encodings: Optional[dict] = None) -> Path:
    """Write named columns; ordinal codes in ``encodings`` are mapped back to strings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    encodings = encodings or {}
    cols = []
    for n in names:
        v = np.asarray(columns[n])
        if n in encodings:
            labels = encodings[n]
            cols.append([labels[min(max(int(round(c)), 0), len(labels) - 1)] for c in v])
        else:
            cols.append([repr(float(c)) for c in v])
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        w.writerows(zip(*cols))
    return path
