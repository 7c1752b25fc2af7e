"""Influence tests: does a query set ``x`` meet the influential variables ``J``?

The exact test queries ``f(y)`` and ``f(y ^ r_t)`` for a uniform ``y`` and
seven random subsets ``r_t`` of ``x``.  For a parity every difference
``f(y) ^ f(y ^ r_t)`` is ``<J ∩ x, r_t>``: identically 0 when ``x`` misses
``J`` and a fair coin otherwise.  The noisy test replaces each of the eight
values with its self-corrected version.
"""
from __future__ import annotations

import numpy as np

from .hadamard import DecodeParams, decode_answers, self_correction_batch
from .oracles import Oracle
from .points import Point, QueryBatch, SparseRows, random_keys

OFFSETS = 7
VALUES = OFFSETS + 1


def random_subsets(xs: SparseRows, copies: int, rng: np.random.Generator) -> SparseRows:
    """``copies`` independent uniform subsets of every row; output row ``i * copies + t``."""
    counts = np.diff(xs.indptr)
    E = xs.indices.size
    out_ptr = np.zeros(len(xs) * copies + 1, dtype=np.int64)
    if E == 0:
        return SparseRows(out_ptr, np.zeros(0, dtype=np.int64))
    row = xs.row_of_entry()
    local = np.arange(E, dtype=np.int64) - xs.indptr[row]
    pos = (copies * xs.indptr[row])[:, None] + np.arange(copies)[None, :] * counts[row][:, None] + local[:, None]
    flat = np.empty(E * copies, dtype=np.int64)
    flat[pos.reshape(-1)] = np.repeat(xs.indices, copies)
    keep = rng.integers(0, 2, size=E * copies, dtype=np.uint8).astype(bool)
    vec_of = np.repeat(np.arange(len(xs) * copies, dtype=np.int64), np.repeat(counts, copies))
    kept_counts = np.bincount(vec_of[keep], minlength=len(xs) * copies)
    np.cumsum(kept_counts, out=out_ptr[1:])
    return SparseRows(out_ptr, flat[keep])


def influence_values(n: int, xs: SparseRows, rng: np.random.Generator) -> QueryBatch:
    """The 8 points ``y, y ^ r_1, ..., y ^ r_7`` per row of ``xs``, row-major."""
    X = len(xs)
    keys = random_keys(rng, X)
    offsets = random_subsets(xs, OFFSETS, rng)
    key_idx = np.repeat(np.arange(X, dtype=np.int64), VALUES).reshape(-1, 1)
    offset_idx = np.full((X, VALUES), -1, dtype=np.int64)
    offset_idx[:, 1:] = np.arange(X * OFFSETS, dtype=np.int64).reshape(X, OFFSETS)
    return QueryBatch(n, keys, key_idx, offsets, offset_idx.reshape(-1))


def influence_plan(n: int, xs: SparseRows, rng: np.random.Generator,
                   reps: int | None = None) -> QueryBatch:
    """Query batch for one influence test per row (self-corrected when ``reps`` is given)."""
    values = influence_values(n, xs, rng)
    if reps is None:
        return values
    return self_correction_batch(values, reps, rng)


def influence_decide(answers: np.ndarray, reps: int | None = None) -> np.ndarray:
    vals = np.asarray(answers, dtype=np.uint8) if reps is None else decode_answers(answers, reps)
    vals = vals.reshape(-1, VALUES)
    return np.bitwise_or.reduce(vals[:, :1] ^ vals[:, 1:], axis=1).astype(np.uint8)


def influence_tests(f: Oracle, xs: SparseRows, rng: np.random.Generator) -> np.ndarray:
    """Exact influence test on every row of ``xs``: 8 queries each."""
    return influence_decide(f.evaluate(influence_plan(f.n, xs, rng)))


def noisy_influence_tests(f: Oracle, xs: SparseRows, rng: np.random.Generator,
                          params: DecodeParams = DecodeParams()) -> np.ndarray:
    """Noisy influence test on every row: ``8 * 2 * reps`` queries each (640 by default)."""
    batch = influence_plan(f.n, xs, rng, params.reps)
    return influence_decide(f.evaluate(batch), params.reps)


def influence_test(f: Oracle, x: Point, rng: np.random.Generator | None = None) -> int:
    rng = rng if rng is not None else np.random.default_rng()
    return int(influence_tests(f, SparseRows.from_sets([x.ones()]), rng)[0])


def noisy_influence_test(f: Oracle, x: Point, rng: np.random.Generator | None = None,
                         params: DecodeParams = DecodeParams()) -> int:
    rng = rng if rng is not None else np.random.default_rng()
    return int(noisy_influence_tests(f, SparseRows.from_sets([x.ones()]), rng, params)[0])
