"""Parity specifications and query-counted oracle access to Boolean functions."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .points import (
    Batch,
    DenseBatch,
    ExpandedBatch,
    Point,
    QueryBatch,
    mix64,
)

ENUMERATION_LIMIT = 20


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class ParitySpec:
    """The parity ``y -> <x, y> mod 2`` on {0,1}^n, stored by the support of ``x``."""

    n: int
    support: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be positive, got {self.n}")
        object.__setattr__(self, "support", frozenset(int(i) for i in self.support))
        bad = [i for i in self.support if not 0 <= i < self.n]
        if bad:
            raise ValueError(f"support indices {sorted(bad)} outside [0, {self.n})")

    def weight(self) -> int:
        return len(self.support)

    def indices(self) -> np.ndarray:
        return np.array(sorted(self.support), dtype=np.int64)

    def point(self) -> Point:
        return Point.from_indices(self.n, self.support)

    def eval(self, p: Point) -> int:
        return eval_parity(self, p)

    def to_json(self) -> dict:
        return {"n": self.n, "support": sorted(self.support)}

    @classmethod
    def from_json(cls, data: dict) -> ParitySpec:
        return cls(int(data["n"]), frozenset(data["support"]))


def eval_parity(spec: ParitySpec, p: Point) -> int:
    """``|support ∩ ones(p)| mod 2`` via popcount of the word-wise AND."""
    if p.n != spec.n:
        raise DimensionError(f"point has n={p.n}, parity has n={spec.n}")
    return int(np.bitwise_count(spec.point().words & p.words).sum() & 1)


class QueryLedger:
    """Monotone query counter, safe to share between threads."""

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def charge(self, m: int) -> None:
        if m < 0:
            raise ValueError("cannot charge a negative number of queries")
        with self._lock:
            self._count += int(m)

    def reset(self) -> None:
        with self._lock:
            self._count = 0

    def __repr__(self) -> str:
        return f"QueryLedger(count={self._count})"


class Oracle:
    """Query access to some ``f: {0,1}^n -> {0,1}``.

    Subclasses implement :meth:`_answer`; :meth:`evaluate` charges the ledger
    one query per row before answering.
    """

    kind = "abstract"
    reads_points = True  # False when answers only need a few coordinates of each row

    def __init__(self, n: int, ledger: QueryLedger | None = None):
        self.n = int(n)
        self.ledger = ledger if ledger is not None else QueryLedger()

    def evaluate(self, batch: Batch) -> np.ndarray:
        if batch.n != self.n:
            raise DimensionError(f"batch has n={batch.n}, oracle has n={self.n}")
        self.ledger.charge(len(batch))
        return self._answer(batch)

    def __call__(self, p: Point) -> int:
        return int(self.evaluate(DenseBatch(p.n, p.words.reshape(1, -1)))[0])

    def _answer(self, batch: Batch) -> np.ndarray:
        raise NotImplementedError

    def fresh(self) -> Oracle:
        """Same function with a private, zeroed ledger."""
        raise NotImplementedError


class ParityOracle(Oracle):
    kind = "exact-parity"
    reads_points = False

    def __init__(self, spec: ParitySpec, ledger: QueryLedger | None = None):
        super().__init__(spec.n, ledger)
        self.spec = spec
        self._support = spec.indices()

    def _answer(self, batch):
        return batch.parities(self._support)

    def fresh(self):
        return ParityOracle(self.spec)

    def __repr__(self):
        return f"ParityOracle(n={self.n}, support={sorted(self.spec.support)})"


class TruthTableOracle(Oracle):
    """Explicit function table for n <= 20; entry ``y`` is ``f`` at the point with integer value ``y``."""

    kind = "truth-table"

    def __init__(self, n: int, table: np.ndarray, ledger: QueryLedger | None = None):
        if n > ENUMERATION_LIMIT:
            raise DimensionError(f"truth tables are limited to n <= {ENUMERATION_LIMIT}")
        table = np.asarray(table, dtype=np.uint8)
        if table.shape != (1 << n,):
            raise ValueError(f"table must have 2^{n} entries")
        super().__init__(n, ledger)
        self.table = table & 1

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> TruthTableOracle:
        return cls(n, rng.integers(0, 2, size=1 << n, dtype=np.uint8))

    @classmethod
    def of(cls, oracle: Oracle) -> TruthTableOracle:
        return cls(oracle.n, truth_table(oracle))

    def _answer(self, batch):
        return self.table[batch.words()[:, 0].astype(np.int64)]

    def fresh(self):
        return TruthTableOracle(self.n, self.table)


class HashFunctionOracle(Oracle):
    """A seeded pseudorandom function: the low bit of a hash chain over the point's words."""

    kind = "random-function"

    def __init__(self, n: int, seed: int, ledger: QueryLedger | None = None):
        super().__init__(n, ledger)
        self.seed = int(seed)
        self._salt = mix64(np.array([self.seed ^ 0x5DEECE66D], dtype=np.uint64))[0]

    def _answer(self, batch):
        words = batch.words()
        h = np.full(words.shape[0], self._salt, dtype=np.uint64)
        for c in range(words.shape[1]):
            h = mix64(h ^ words[:, c])
        return (h >> np.uint64(63)).astype(np.uint8)

    def fresh(self):
        return HashFunctionOracle(self.n, self.seed)


def random_function(n: int, rng: np.random.Generator) -> Oracle:
    """Uniform function as a table when ``n <= 20``, otherwise a seeded hash."""
    if n <= ENUMERATION_LIMIT:
        return TruthTableOracle.random(n, rng)
    return HashFunctionOracle(n, int(rng.integers(2**63)))


class NoisyParityOracle(Oracle):
    """A parity with a seeded, deterministic set of flipped points.

    ``mode="exact"`` (n <= 20) flips exactly ``round(noise_rate * 2^n)``
    uniformly chosen points.  ``mode="hash"`` flips each point independently
    with probability ``noise_rate`` through a seeded hash of its words.
    """

    kind = "noisy-parity"

    def __init__(self, spec: ParitySpec, noise_rate, seed: int, mode: str = "auto",
                 ledger: QueryLedger | None = None):
        rate = noise_rate if isinstance(noise_rate, Fraction) else Fraction(str(noise_rate))
        if not 0 <= rate < Fraction(1, 2):
            raise ValueError(f"noise rate must lie in [0, 1/2), got {noise_rate}")
        if mode == "auto":
            mode = "exact" if spec.n <= ENUMERATION_LIMIT else "hash"
        if mode not in ("exact", "hash"):
            raise ValueError(f"unknown noise mode {mode!r}")
        if mode == "exact" and spec.n > ENUMERATION_LIMIT:
            raise DimensionError(f"exact noise mode needs n <= {ENUMERATION_LIMIT}")
        super().__init__(spec.n, ledger)
        self.spec = spec
        self.noise_rate = rate
        self.seed = int(seed)
        self.mode = mode
        self._support = spec.indices()
        if mode == "exact":
            size = 1 << spec.n
            flips = round(rate * size)
            rng = np.random.default_rng(self.seed)
            self.flip_table = np.zeros(size, dtype=np.uint8)
            self.flip_table[rng.choice(size, size=flips, replace=False)] = 1
        else:
            self._threshold = np.uint64(min(int(rate * 2**64), 2**64 - 1))
            self._salt = mix64(np.array([self.seed], dtype=np.uint64))[0]

    def flips(self, batch: Batch) -> np.ndarray:
        words = batch.words()
        if self.mode == "exact":
            return self.flip_table[words[:, 0].astype(np.int64)]
        h = np.full(words.shape[0], self._salt, dtype=np.uint64)
        for c in range(words.shape[1]):
            h = mix64(h ^ words[:, c])
        return (h < self._threshold).astype(np.uint8)

    def _answer(self, batch):
        return batch.parities(self._support) ^ self.flips(batch)

    def fresh(self):
        return NoisyParityOracle(self.spec, self.noise_rate, self.seed, self.mode)


class LiftedOracle(Oracle):
    """``f'(z) = f(expand(z))`` where ``expand(z)_i = z[class_of[i]]``.

    Shares the ledger of the underlying oracle: one underlying query per lifted query.
    """

    kind = "lifted"

    @property
    def reads_points(self) -> bool:
        return self.base.reads_points

    def __init__(self, base: Oracle, class_of: np.ndarray, ell: int):
        class_of = np.asarray(class_of, dtype=np.int64)
        if class_of.size != base.n:
            raise DimensionError(f"partition covers n={class_of.size}, oracle has n={base.n}")
        super().__init__(ell, base.ledger)
        self.base = base
        self.class_of = class_of

    def evaluate(self, batch):
        if batch.n != self.n:
            raise DimensionError(f"batch has n={batch.n}, lifted oracle has n={self.n}")
        return self.base.evaluate(ExpandedBatch(batch, self.class_of))

    def fresh(self):
        return LiftedOracle(self.base.fresh(), self.class_of, self.n)


class DualOracle(Oracle):
    """``f(y) XOR (|y| mod 2)``: swaps the parity of support ``x`` with that of ``1^n XOR x``."""

    kind = "dual"

    @property
    def reads_points(self) -> bool:
        return self.base.reads_points

    def __init__(self, base: Oracle):
        super().__init__(base.n, base.ledger)
        self.base = base
        self._all = np.arange(base.n, dtype=np.int64)

    def evaluate(self, batch):
        return self.base.evaluate(batch) ^ batch.parities(self._all)

    def fresh(self):
        return DualOracle(self.base.fresh())


def make_noisy_parity(spec: ParitySpec, noise_rate, seed: int, mode: str = "auto") -> NoisyParityOracle:
    return NoisyParityOracle(spec, noise_rate, seed, mode)


def truth_table(f: Oracle) -> np.ndarray:
    """All ``2^n`` values of ``f`` (charges ``2^n`` queries)."""
    if f.n > ENUMERATION_LIMIT:
        raise DimensionError(f"enumeration needs n <= {ENUMERATION_LIMIT}, got n={f.n}")
    return f.evaluate(DenseBatch.all_points(f.n))


def _table(f) -> np.ndarray:
    if isinstance(f, np.ndarray):
        return f.astype(np.uint8)
    return truth_table(f)


def distance(f, g) -> Fraction:
    """Exact fraction of points where ``f`` and ``g`` differ (oracles or tables)."""
    tf, tg = _table(f), _table(g)
    if tf.shape != tg.shape:
        raise DimensionError("functions have different dimensions")
    return Fraction(int(np.count_nonzero(tf != tg)), tf.size)


def parity_table(spec: ParitySpec) -> np.ndarray:
    if spec.n > ENUMERATION_LIMIT:
        raise DimensionError(f"enumeration needs n <= {ENUMERATION_LIMIT}")
    idx = np.arange(1 << spec.n, dtype=np.uint64)
    mask = np.uint64(sum(1 << i for i in spec.support))
    return (np.bitwise_count(idx & mask) & 1).astype(np.uint8)


def sample_support(n: int, k: int, rng: np.random.Generator) -> frozenset[int]:
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    return frozenset(int(i) for i in rng.choice(n, size=k, replace=False))


def agree_on(f: Oracle, g: Oracle, points: Iterable[Point]) -> bool:
    batch = QueryBatch.from_points(list(points))
    return bool(np.array_equal(f.evaluate(batch), g.evaluate(batch)))


__all__ = [
    "DimensionError", "ParitySpec", "eval_parity", "QueryLedger", "Oracle", "ParityOracle",
    "TruthTableOracle", "HashFunctionOracle", "random_function", "NoisyParityOracle", "LiftedOracle", "DualOracle", "make_noisy_parity",
    "truth_table", "distance", "parity_table", "sample_support", "agree_on",
]
