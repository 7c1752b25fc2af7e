"""Brute-force Walsh-Hadamard ground truth for small n."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .oracles import ENUMERATION_LIMIT, DimensionError, Oracle, ParitySpec, truth_table


def fwht(values: np.ndarray) -> np.ndarray:
    """Unnormalised fast Walsh-Hadamard transform of a length-2^n vector.

    Integer input gives exact integer output.
    """
    a = np.array(values, copy=True)
    size = a.size
    if size & (size - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < size:
        a = a.reshape(-1, 2, h)
        a = np.stack([a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]], axis=1)
        h *= 2
    return a.reshape(size)


def walsh_coefficients(f) -> np.ndarray:
    """Integer coefficients ``sum_y (-1)^(f(y) + <x, y>)`` indexed by ``x``.

    Dividing by ``2^n`` gives the Fourier coefficients of ``(-1)^f``.
    """
    table = truth_table(f) if isinstance(f, Oracle) else np.asarray(f, dtype=np.uint8)
    return fwht(1 - 2 * table.astype(np.int64))


def _support_of(x: int) -> tuple[int, ...]:
    return tuple(i for i in range(x.bit_length()) if (x >> i) & 1)


def nearest_k_parity(f, k: int, n: int | None = None) -> tuple[ParitySpec, Fraction]:
    """Closest k-parity to ``f`` and its exact distance.

    Ties go to the lexicographically smallest sorted support.
    """
    if isinstance(f, Oracle):
        n = f.n
    elif n is None:
        n = int(np.log2(len(f)))
    if n > ENUMERATION_LIMIT:
        raise DimensionError(f"enumeration needs n <= {ENUMERATION_LIMIT}, got n={n}")
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}")
    coeffs = walsh_coefficients(f)
    xs = np.arange(1 << n, dtype=np.uint64)
    candidates = np.flatnonzero(np.bitwise_count(xs) == k)
    best = coeffs[candidates].max()
    tied = candidates[coeffs[candidates] == best]
    x = min((int(t) for t in tied), key=_support_of)
    dist = Fraction((1 << n) - int(best), 1 << (n + 1))
    return ParitySpec(n, frozenset(_support_of(x))), dist


def distance_to_k_parities(f, k: int, n: int | None = None) -> Fraction:
    return nearest_k_parity(f, k, n)[1]


def distance_to_parities(f) -> Fraction:
    """Distance from ``f`` to the nearest parity of any size."""
    coeffs = walsh_coefficients(f)
    size = coeffs.size
    return Fraction(size - int(coeffs.max()), 2 * size)
