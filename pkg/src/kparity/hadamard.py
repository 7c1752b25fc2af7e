"""Hadamard-code self-correction and the BLR linearity test."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .oracles import Oracle
from .points import Point, QueryBatch, SparseRows, random_keys


@dataclass(frozen=True)
class DecodeParams:
    reps: int = 40

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError(f"reps must be positive, got {self.reps}")

    @property
    def queries_per_value(self) -> int:
        return 2 * self.reps


def majority(samples: np.ndarray, axis: int = -1) -> np.ndarray:
    """Majority bit along ``axis``; an exact tie counts as 1."""
    samples = np.asarray(samples, dtype=np.int64)
    return (2 * samples.sum(axis=axis) >= samples.shape[axis]).astype(np.uint8)


def self_correction_batch(values: QueryBatch, reps: int, rng: np.random.Generator) -> QueryBatch:
    """Queries decoding every row ``v`` of ``values``.

    Row order is ``(value, repetition, [w, w ^ v])`` with a fresh uniform ``w``
    per repetition, so the result has ``2 * reps * len(values)`` rows.
    """
    V = len(values)
    fresh = random_keys(rng, V * reps)
    keys = np.concatenate([values.keys, fresh])
    base = values.keys.size
    w_idx = base + np.arange(V * reps, dtype=np.int64)
    K = values.key_idx.shape[1]

    key_idx = np.full((V * reps, 2, K + 1), -1, dtype=np.int64)
    key_idx[:, :, 0] = w_idx[:, None]
    key_idx[:, 1, 1:] = np.repeat(values.key_idx, reps, axis=0)
    offset_idx = np.full((V * reps, 2), -1, dtype=np.int64)
    offset_idx[:, 1] = np.repeat(values.offset_idx, reps)
    return QueryBatch(
        values.n,
        keys,
        key_idx.reshape(-1, K + 1),
        values.offsets,
        offset_idx.reshape(-1),
    )


def decode_answers(answers: np.ndarray, reps: int) -> np.ndarray:
    """Majority of ``f(w) ^ f(w ^ v)`` per value, for answers laid out by :func:`self_correction_batch`."""
    a = np.asarray(answers, dtype=np.uint8).reshape(-1, reps, 2)
    return majority(a[:, :, 0] ^ a[:, :, 1], axis=1)


def self_correct_many(f: Oracle, xs: SparseRows, params: DecodeParams,
                      rng: np.random.Generator) -> np.ndarray:
    """Self-corrected value at every sparse point in ``xs``."""
    values = QueryBatch(
        f.n,
        np.zeros(0, dtype=np.uint64),
        np.full((len(xs), 0), -1, dtype=np.int64),
        xs,
        np.arange(len(xs), dtype=np.int64),
    )
    batch = self_correction_batch(values, params.reps, rng)
    return decode_answers(f.evaluate(batch), params.reps)


def self_correct(f: Oracle, x: Point, params: DecodeParams = DecodeParams(),
                 rng: np.random.Generator | None = None) -> int:
    """Decode ``g(x)`` for the parity ``g`` nearest ``f`` using ``2 * reps`` queries."""
    rng = rng if rng is not None else np.random.default_rng()
    return int(self_correct_many(f, SparseRows.from_sets([x.ones()]), params, rng)[0])


def blr_rounds(proximity=Fraction(1, 10), confidence=Fraction(99, 100)) -> int:
    """Smallest ``t`` with ``(1 - proximity)^t <= 1 - confidence``."""
    proximity, confidence = Fraction(proximity), Fraction(confidence)
    if not 0 < proximity < 1 or not 0 < confidence < 1:
        raise ValueError("proximity and confidence must lie in (0, 1)")
    t = math.ceil(math.log(1 - confidence) / math.log(1 - proximity))
    while (1 - proximity) ** t > 1 - confidence:
        t += 1
    while t > 1 and (1 - proximity) ** (t - 1) <= 1 - confidence:
        t -= 1
    return t


def blr_batch(n: int, t: int, rng: np.random.Generator) -> QueryBatch:
    """Rows ``a_s, b_s, a_s ^ b_s`` for ``s < t``."""
    keys = random_keys(rng, 2 * t)
    a = 2 * np.arange(t, dtype=np.int64)
    key_idx = np.full((t, 3, 2), -1, dtype=np.int64)
    key_idx[:, 0, 0] = a
    key_idx[:, 1, 0] = a + 1
    key_idx[:, 2, 0] = a
    key_idx[:, 2, 1] = a + 1
    return QueryBatch(n, keys, key_idx.reshape(-1, 2), SparseRows.empty(),
                      np.full(3 * t, -1, dtype=np.int64))


def blr_decide(answers: np.ndarray) -> bool:
    a = np.asarray(answers, dtype=np.uint8).reshape(-1, 3)
    return bool(np.all(a[:, 0] ^ a[:, 1] == a[:, 2]))


def blr_linearity_test(f: Oracle, proximity=Fraction(1, 10), confidence=Fraction(99, 100),
                       rng: np.random.Generator | None = None, t: int | None = None) -> bool:
    """True means accept.  Never rejects a parity; uses exactly ``3 t`` queries."""
    rng = rng if rng is not None else np.random.default_rng()
    t = blr_rounds(proximity, confidence) if t is None else t
    if t < 1:
        raise ValueError("need at least one BLR round")
    return blr_decide(f.evaluate(blr_batch(f.n, t, rng)))
