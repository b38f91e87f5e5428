"""Noise primitives, seeded random streams and privacy budget accounting.

Every sampler takes an explicit random source. ``epsilon = inf`` is a
first-class value meaning "no noise"; callers short-circuit on it.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import BudgetOverspendError, InvalidParameterError

_MASK64 = (1 << 64) - 1
_SUM_TOL = 1e-12


def _hash64(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


class SeededRng:
    """A reproducible random stream identified by ``(seed, stream)``.

    The underlying generator is PCG64 seeded through ``SeedSequence`` with
    the stream id as spawn key, so identical pairs give identical sequences
    on every platform. :meth:`child` derives an independent stream by hashing
    labels, e.g. ``rng.child("column", 3, "discretize")``.
    """

    def __init__(self, seed: int, stream: int = 0):
        seed, stream = int(seed), int(stream)
        if not (0 <= seed <= _MASK64 and 0 <= stream <= _MASK64):
            raise InvalidParameterError("seed and stream must be unsigned 64-bit integers")
        self.seed = seed
        self.stream = stream
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,)))
        )

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, *labels) -> "SeededRng":
        return SeededRng(self.seed, _hash64(self.stream, *labels))

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


def as_generator(rng) -> np.random.Generator:
    """Coerce ``rng`` (SeededRng, Generator, int or None) to a numpy Generator."""
    if isinstance(rng, SeededRng):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, (int, np.integer)):
        return SeededRng(int(rng)).generator
    raise InvalidParameterError(f"cannot use {rng!r} as a random source")


def as_seeded(rng) -> SeededRng:
    """Coerce to a :class:`SeededRng`; generators are used to draw a fresh seed."""
    if isinstance(rng, SeededRng):
        return rng
    if isinstance(rng, (int, np.integer)):
        return SeededRng(int(rng))
    gen = as_generator(rng)
    return SeededRng(int(gen.integers(0, 2**63)))


# ---------------------------------------------------------------------------
# budgets


@dataclass(frozen=True)
class PrivacyBudget:
    """An ``(epsilon, delta)`` pair. ``epsilon = inf`` disables all noise."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        eps = float(self.epsilon)
        if math.isnan(eps) or eps < 0:
            raise InvalidParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if not (0.0 <= float(self.delta) < 1.0):
            raise InvalidParameterError(f"delta must lie in [0, 1), got {self.delta}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.epsilon)

    def scaled(self, fraction: float) -> "PrivacyBudget":
        if self.is_infinite:
            return PrivacyBudget(math.inf, self.delta * fraction)
        return PrivacyBudget(self.epsilon * fraction, self.delta * fraction)

    def to_dict(self):
        return {"epsilon": _eps_json(self.epsilon), "delta": self.delta}


def _eps_json(eps: float):
    return "inf" if math.isinf(eps) else eps


@dataclass
class BudgetLedger:
    """Sequential-composition ledger over a total budget.

    Entries are ``(label, fraction)`` pairs; the fractions may never sum to
    more than one. Sub-ledgers created with :meth:`subledger` account for a
    child budget independently and appear nested in :meth:`snapshot`.
    """

    total: PrivacyBudget
    entries: list = field(default_factory=list)
    children: dict = field(default_factory=dict)

    @property
    def spent_fraction(self) -> float:
        return math.fsum(f for _, f in self.entries)

    @property
    def remaining_fraction(self) -> float:
        return max(0.0, 1.0 - self.spent_fraction)

    def split(self, fractions: Sequence[tuple[str, float]]) -> list[PrivacyBudget]:
        fractions = [(str(label), float(f)) for label, f in fractions]
        for label, f in fractions:
            if not (0.0 < f <= 1.0):
                raise InvalidParameterError(f"fraction for {label!r} must lie in (0, 1], got {f}")
        requested = math.fsum(f for _, f in fractions)
        if self.spent_fraction + requested > 1.0 + _SUM_TOL:
            raise BudgetOverspendError(
                f"requested {requested:.6g} of the budget but only "
                f"{self.remaining_fraction:.6g} remains"
            )
        self.entries.extend(fractions)
        return [self.total.scaled(f) for _, f in fractions]

    def spend(self, label: str, fraction: float) -> PrivacyBudget:
        return self.split([(label, fraction)])[0]

    def subledger(self, label: str, budget: PrivacyBudget) -> "BudgetLedger":
        child = BudgetLedger(budget)
        self.children[label] = child
        return child

    def child_epsilons(self) -> list[float]:
        return [self.total.scaled(f).epsilon for _, f in self.entries]

    def snapshot(self) -> dict:
        out = {
            "total": self.total.to_dict(),
            "spent_fraction": self.spent_fraction,
            "entries": [
                {"label": label, "fraction": f, "epsilon": _eps_json(self.total.scaled(f).epsilon)}
                for label, f in self.entries
            ],
        }
        if self.children:
            out["children"] = {k: v.snapshot() for k, v in self.children.items()}
        return out


def ledger_split(budget, fractions: Iterable[tuple[str, float]]) -> list[PrivacyBudget]:
    """Split a budget (or record into an existing ledger) by labelled fractions.

    >>> [b.epsilon for b in ledger_split(PrivacyBudget(1.0), [("disc", 0.1), ("model", 0.9)])]
    [0.1, 0.9]
    """
    ledger = budget if isinstance(budget, BudgetLedger) else BudgetLedger(budget)
    return ledger.split(list(fractions))


# ---------------------------------------------------------------------------
# samplers


def laplace_noise(scale: float, rng, size=None):
    """Draw from Laplace(0, scale); ``scale == 0`` returns exact zeros."""
    scale = float(scale)
    if math.isnan(scale) or scale < 0:
        raise InvalidParameterError(f"Laplace scale must be >= 0, got {scale}")
    if scale == 0.0:
        return 0.0 if size is None else np.zeros(size)
    return as_generator(rng).laplace(0.0, scale, size=size)


def geometric_noise(epsilon: float, rng, size=None):
    """Two-sided geometric noise with ``P(k) ∝ exp(-epsilon * |k|)``.

    Sampled as the difference of two i.i.d. geometric variables with success
    probability ``1 - exp(-epsilon)``.
    """
    epsilon = float(epsilon)
    if math.isnan(epsilon) or epsilon <= 0:
        raise InvalidParameterError(f"epsilon must be > 0, got {epsilon}")
    if math.isinf(epsilon):
        raise InvalidParameterError("epsilon = inf means no noise; handle it before calling")
    gen = as_generator(rng)
    p = -math.expm1(-epsilon)
    out = gen.geometric(p, size=size) - gen.geometric(p, size=size)
    return int(out) if size is None else out.astype(np.int64)


def sample_weighted_index(weights, rng) -> int:
    """Return ``i`` with probability ``weights[i] / sum(weights)``."""
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0:
        raise InvalidParameterError("weights must be non-empty")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidParameterError("weights must be finite and non-negative")
    cdf = np.cumsum(w)
    total = cdf[-1]
    if total <= 0:
        raise InvalidParameterError("at least one weight must be positive")
    u = as_generator(rng).random() * total
    idx = int(np.searchsorted(cdf, u, side="right"))
    # guard against u landing exactly on the total through rounding
    idx = min(idx, w.size - 1)
    while w[idx] == 0:
        idx -= 1
    return idx
