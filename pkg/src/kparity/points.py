"""Packed Boolean points and batched query representations.

A single point of {0,1}^n is stored as little-endian 64-bit words: coordinate
``i`` lives in bit ``i % 64`` of word ``i // 64``.

Testers issue millions of queries, so oracles are always evaluated on a
batch.  A :class:`QueryBatch` describes every row as the XOR of a few
uniformly random vectors (each named by a 64-bit key, expanded on demand by a
splitmix64 stream) and at most one explicit sparse vector.  Oracles that only
need a handful of coordinates (parities) read them through
:meth:`QueryBatch.parities`; everything else materialises the rows with
:meth:`QueryBatch.words`.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

WORD = 64
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ONE = np.uint64(1)


def n_words(n: int) -> int:
    return max(1, -(-n // WORD))


def tail_mask(n: int) -> np.uint64:
    """Mask of the valid bits in the last word of an ``n``-bit point."""
    r = n % WORD
    if r == 0:
        return np.uint64(0xFFFFFFFFFFFFFFFF)
    return np.uint64((1 << r) - 1)


def mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finaliser, applied elementwise (wrapping uint64 arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_words(keys: np.ndarray, word_index) -> np.ndarray:
    """Word ``word_index`` of the pseudorandom vector named by each key."""
    keys = np.asarray(keys, dtype=np.uint64)
    w = np.asarray(word_index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(keys + (w + _ONE) * _GOLDEN)


def random_keys(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.integers(0, 2**64, size=size, dtype=np.uint64, endpoint=False)


def pack_bits(bits: np.ndarray, n: int) -> np.ndarray:
    """Pack a ``(..., n)`` 0/1 array into ``(..., n_words(n))`` uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8)
    w = n_words(n)
    pad = w * WORD - n
    if pad:
        bits = np.concatenate(
            [bits, np.zeros(bits.shape[:-1] + (pad,), dtype=np.uint8)], axis=-1
        )
    packed = np.packbits(bits, axis=-1, bitorder="little")
    return packed.view("<u8").astype(np.uint64, copy=False).reshape(bits.shape[:-1] + (w,))


def unpack_words(words: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`."""
    words = np.ascontiguousarray(words, dtype="<u8")
    as_bytes = words.view(np.uint8)
    return np.unpackbits(as_bytes, axis=-1, bitorder="little")[..., :n]


def odd_multiplicity(coords: np.ndarray) -> np.ndarray:
    """Sorted coordinates appearing an odd number of times (GF(2) reduction)."""
    values, counts = np.unique(np.asarray(coords, dtype=np.int64), return_counts=True)
    return values[(counts & 1) == 1]


class Point:
    """A point of {0,1}^n in packed-word form."""

    __slots__ = ("n", "words")

    def __init__(self, n: int, words: np.ndarray | None = None):
        if n < 1:
            raise ValueError(f"dimension must be positive, got {n}")
        self.n = int(n)
        if words is None:
            words = np.zeros(n_words(n), dtype=np.uint64)
        words = np.array(words, dtype=np.uint64).reshape(-1)
        if words.size != n_words(n):
            raise ValueError(f"expected {n_words(n)} words for n={n}, got {words.size}")
        words[-1] &= tail_mask(n)
        self.words = words

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> Point:
        idx = np.asarray(sorted(set(int(i) for i in indices)), dtype=np.int64)
        if idx.size and (idx[0] < 0 or idx[-1] >= n):
            raise ValueError(f"indices out of range for n={n}")
        words = np.zeros(n_words(n), dtype=np.uint64)
        np.bitwise_xor.at(words, idx >> 6, _ONE << (idx & 63).astype(np.uint64))
        return cls(n, words)

    @classmethod
    def from_bits(cls, bits: Sequence[int] | str) -> Point:
        """``bits[i]`` is coordinate ``i``; strings are read left to right."""
        if isinstance(bits, str):
            bits = [int(c) for c in bits if c in "01"]
        arr = np.asarray(bits, dtype=np.uint8)
        return cls(arr.size, pack_bits(arr, arr.size))

    @classmethod
    def from_int(cls, n: int, value: int) -> Point:
        if value < 0 or value >> n:
            raise ValueError(f"{value} does not fit in {n} bits")
        words = [(value >> (WORD * i)) & 0xFFFFFFFFFFFFFFFF for i in range(n_words(n))]
        return cls(n, np.array(words, dtype=np.uint64))

    @classmethod
    def zeros(cls, n: int) -> Point:
        return cls(n)

    @classmethod
    def ones_vector(cls, n: int) -> Point:
        return cls(n, np.full(n_words(n), 0xFFFFFFFFFFFFFFFF, dtype=np.uint64))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> Point:
        return cls(n, random_keys(rng, n_words(n)))

    def ones(self) -> np.ndarray:
        """Sorted indices of the 1-coordinates."""
        return np.flatnonzero(unpack_words(self.words, self.n))

    def weight(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def bit(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(i)
        return int((self.words[i >> 6] >> np.uint64(i & 63)) & _ONE)

    def to_int(self) -> int:
        return sum(int(w) << (WORD * i) for i, w in enumerate(self.words))

    def __xor__(self, other: Point) -> Point:
        if not isinstance(other, Point):
            return NotImplemented
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
        return Point(self.n, self.words ^ other.words)

    def __and__(self, other: Point) -> Point:
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
        return Point(self.n, self.words & other.words)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Point):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.words, other.words))

    def __hash__(self) -> int:
        return hash((self.n, self.words.tobytes()))

    def __repr__(self) -> str:
        if self.n <= 64:
            bits = "".join(str(b) for b in unpack_words(self.words, self.n))
            return f"Point({bits!r})"
        return f"Point(n={self.n}, weight={self.weight()})"


class Batch(Protocol):
    """Anything an oracle can be evaluated on."""

    n: int

    def __len__(self) -> int: ...

    def parities(self, support: np.ndarray) -> np.ndarray: ...

    def words(self) -> np.ndarray: ...

    def fingerprint(self) -> bytes: ...


def _digest(*parts) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(str(p.dtype).encode())
            h.update(str(p.shape).encode())
            h.update(np.ascontiguousarray(p).tobytes())
        else:
            h.update(repr(p).encode())
    return h.digest()


@dataclass(frozen=True, eq=False)
class SparseRows:
    """CSR collection of sparse 0/1 vectors (sorted, duplicate-free rows)."""

    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def empty(cls) -> SparseRows:
        return cls(np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64))

    @classmethod
    def from_sets(cls, sets: Iterable[Iterable[int]]) -> SparseRows:
        rows = [np.asarray(sorted(set(int(i) for i in s)), dtype=np.int64) for s in sets]
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        if rows:
            indptr[1:] = np.cumsum([r.size for r in rows])
            indices = np.concatenate(rows) if indptr[-1] else np.zeros(0, dtype=np.int64)
        else:
            indices = np.zeros(0, dtype=np.int64)
        return cls(indptr, indices)

    def __len__(self) -> int:
        return self.indptr.size - 1

    def row(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def row_of_entry(self) -> np.ndarray:
        return np.repeat(np.arange(len(self), dtype=np.int64), np.diff(self.indptr))

    def intersection_parity(self, support: np.ndarray, n: int) -> np.ndarray:
        """``|row ∩ support| mod 2`` for every row."""
        if len(self) == 0:
            return np.zeros(0, dtype=np.uint8)
        member = np.zeros(n, dtype=np.int64)
        member[support] = 1
        csum = np.zeros(self.indices.size + 1, dtype=np.int64)
        np.cumsum(member[self.indices], out=csum[1:])
        counts = csum[self.indptr[1:]] - csum[self.indptr[:-1]]
        return (counts & 1).astype(np.uint8)

    def dense_words(self, n: int) -> np.ndarray:
        out = np.zeros((len(self), n_words(n)), dtype=np.uint64)
        if self.indices.size:
            rows = self.row_of_entry()
            bits = _ONE << (self.indices & 63).astype(np.uint64)
            np.bitwise_xor.at(out, (rows, self.indices >> 6), bits)
        return out


@dataclass(frozen=True, eq=False)
class QueryBatch:
    """``m`` query points in {0,1}^n.

    Row ``r`` equals the XOR of the random vectors ``keys[key_idx[r, c]]``
    over columns with ``key_idx >= 0``, XOR the sparse vector
    ``offsets.row(offset_idx[r])`` when ``offset_idx[r] >= 0``.
    """

    n: int
    keys: np.ndarray
    key_idx: np.ndarray
    offsets: SparseRows
    offset_idx: np.ndarray

    def __len__(self) -> int:
        return self.key_idx.shape[0]

    @classmethod
    def from_points(cls, points: Sequence[Point]) -> QueryBatch:
        if not points:
            raise ValueError("empty batch")
        n = points[0].n
        if any(p.n != n for p in points):
            raise ValueError("dimension mismatch inside batch")
        offsets = SparseRows.from_sets(p.ones() for p in points)
        m = len(points)
        return cls(
            n,
            np.zeros(0, dtype=np.uint64),
            np.full((m, 0), -1, dtype=np.int64),
            offsets,
            np.arange(m, dtype=np.int64),
        )

    @classmethod
    def uniform(cls, n: int, m: int, rng: np.random.Generator) -> QueryBatch:
        """``m`` independent uniform points."""
        return cls(
            n,
            random_keys(rng, m),
            np.arange(m, dtype=np.int64).reshape(m, 1),
            SparseRows.empty(),
            np.full(m, -1, dtype=np.int64),
        )

    def key_parities(self, support: np.ndarray) -> np.ndarray:
        """``<support, R_key> mod 2`` for every key."""
        out = np.zeros(self.keys.size, dtype=np.uint64)
        if support.size == 0 or self.keys.size == 0:
            return out.astype(np.uint8)
        word_ids = support >> 6
        for w in np.unique(word_ids):
            sel = support[word_ids == w] & 63
            mask = np.bitwise_or.reduce(_ONE << sel.astype(np.uint64))
            out ^= np.bitwise_count(stream_words(self.keys, w) & mask).astype(np.uint64)
        return (out & _ONE).astype(np.uint8)

    def parities(self, support: np.ndarray) -> np.ndarray:
        support = np.asarray(support, dtype=np.int64)
        m = len(self)
        result = np.zeros(m, dtype=np.uint8)
        if self.key_idx.shape[1]:
            kp = np.append(self.key_parities(support), np.uint8(0))
            for c in range(self.key_idx.shape[1]):
                result ^= kp[self.key_idx[:, c]]
        if len(self.offsets):
            op = np.append(self.offsets.intersection_parity(support, self.n), np.uint8(0))
            result ^= op[self.offset_idx]
        return result

    def words(self) -> np.ndarray:
        w = n_words(self.n)
        out = np.zeros((len(self), w), dtype=np.uint64)
        if self.key_idx.shape[1] and self.keys.size:
            kw = stream_words(self.keys[:, None], np.arange(w, dtype=np.uint64)[None, :])
            kw = np.vstack([kw, np.zeros((1, w), dtype=np.uint64)])
            for c in range(self.key_idx.shape[1]):
                out ^= kw[self.key_idx[:, c]]
        if len(self.offsets):
            ow = np.vstack([self.offsets.dense_words(self.n), np.zeros((1, w), dtype=np.uint64)])
            out ^= ow[self.offset_idx]
        out[:, -1] &= tail_mask(self.n)
        return out

    def fingerprint(self) -> bytes:
        return _digest(
            "query", self.n, self.keys, self.key_idx,
            self.offsets.indptr, self.offsets.indices, self.offset_idx,
        )


@dataclass(frozen=True, eq=False)
class DenseBatch:
    """Explicit points given as a ``(m, n_words)`` word array."""

    n: int
    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] != n_words(self.n):
            raise ValueError("word array has the wrong shape")

    @classmethod
    def all_points(cls, n: int) -> DenseBatch:
        """Every point of {0,1}^n, in truth-table order (n <= 20)."""
        if n > 20:
            raise ValueError(f"enumeration limited to n <= 20, got {n}")
        return cls(n, np.arange(1 << n, dtype=np.uint64).reshape(-1, 1))

    def __len__(self) -> int:
        return self.data.shape[0]

    def parities(self, support: np.ndarray) -> np.ndarray:
        mask = Point.from_indices(self.n, np.asarray(support).tolist()).words
        return (np.bitwise_count(self.data & mask).sum(axis=1) & 1).astype(np.uint8)

    def words(self) -> np.ndarray:
        return self.data

    def fingerprint(self) -> bytes:
        return _digest("dense", self.n, self.data)


@dataclass(frozen=True, eq=False)
class ExpandedBatch:
    """Lift points of {0,1}^ell to {0,1}^n by copying ``z[class_of[i]]`` into coordinate ``i``."""

    inner: Batch
    class_of: np.ndarray

    @property
    def n(self) -> int:
        return self.class_of.size

    def __len__(self) -> int:
        return len(self.inner)

    def parities(self, support: np.ndarray) -> np.ndarray:
        return self.inner.parities(odd_multiplicity(self.class_of[np.asarray(support, dtype=np.int64)]))

    def words(self) -> np.ndarray:
        bits = unpack_words(self.inner.words(), self.inner.n)
        return pack_bits(bits[:, self.class_of], self.n)

    def fingerprint(self) -> bytes:
        return _digest("expand", self.inner.fingerprint(), self.class_of)
