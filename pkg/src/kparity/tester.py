"""The non-adaptive k-parity tester.

Pipeline for ``test_k_parity``: swap ``k`` for ``n - k`` when ``k > n/2``,
run BLR, then either the small-k consistency fallback or the reduced tester,
preceded by a random ``100 k^2``-way partition when ``n`` is larger than that.
Every query point is drawn from the rng before the answers it depends on are
read, so the whole query set is a function of the seed alone.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .hadamard import (
    DecodeParams,
    blr_batch,
    blr_decide,
    blr_rounds,
    decode_answers,
    self_correction_batch,
)
from .influence import VALUES, influence_decide, influence_plan
from .oracles import DimensionError, DualOracle, LiftedOracle, Oracle
from .points import QueryBatch, SparseRows, unpack_words

CHUNK_ROWS = 2048
CHUNK_BITS = 1 << 25  # cap on materialised query bits per chunk


@dataclass(frozen=True, eq=False)
class PartitionMap:
    """Class assignment ``class_of[i] in [0, ell)`` for every ``i in [0, n)``."""

    n: int
    ell: int
    class_of: np.ndarray

    def __post_init__(self):
        if self.class_of.shape != (self.n,):
            raise ValueError("class_of must have length n")
        if self.n and (self.class_of.min() < 0 or self.class_of.max() >= self.ell):
            raise ValueError("class index out of range")

    @classmethod
    def identity(cls, n: int) -> PartitionMap:
        return cls(n, n, np.arange(n, dtype=np.int64))

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.class_of == c)

    def empty_classes(self) -> int:
        return self.ell - np.unique(self.class_of).size


def random_partition(n: int, ell: int, rng: np.random.Generator) -> PartitionMap:
    if n < 1 or ell < 1:
        raise ValueError(f"need n, ell >= 1, got n={n}, ell={ell}")
    return PartitionMap(n, ell, rng.integers(0, ell, size=n, dtype=np.int64))


def _odd_classes(classes: np.ndarray) -> np.ndarray:
    values, counts = np.unique(classes, return_counts=True)
    return values[(counts & 1) == 1]


def lifted_support(pi: PartitionMap, J) -> frozenset[int]:
    """Classes holding an odd number of elements of ``J``: the support of the lifted parity."""
    J = np.asarray(sorted(J), dtype=np.int64)
    if J.size and (J[0] < 0 or J[-1] >= pi.n):
        raise ValueError("J is not a subset of [n]")
    return frozenset(int(c) for c in _odd_classes(pi.class_of[J]))


def odd_occupancy(pi: PartitionMap, J) -> int:
    return len(lifted_support(pi, J))


@dataclass(frozen=True)
class LemmaReport:
    rate_small: float
    rate_big: float
    rate_big_by_size: dict
    trials: int
    in_lemma_range: bool


def check_partition_lemma(n: int, k: int, trials: int, rng: np.random.Generator,
                          small_size: int | None = None,
                          big_sizes: tuple[int, ...] | None = None) -> LemmaReport:
    """Monte-Carlo rates of ``N(Π,J) = |J|`` (``|J| <= k``) and ``N(Π,J) > k`` (``|J| > k``).

    Only the classes of the elements of ``J`` are drawn; they are i.i.d.
    uniform over ``ell = 100 k^2`` classes exactly as in a full partition.
    """
    ell = 100 * k * k
    small_size = k if small_size is None else small_size
    big_sizes = (k + 1, 2 * k) if big_sizes is None else big_sizes
    if small_size > k or any(b <= k for b in big_sizes):
        raise ValueError("small size must be <= k and big sizes > k")
    if max(big_sizes + (small_size,)) > n:
        raise ValueError("set sizes exceed n")

    def rate(size: int, accept) -> float:
        classes = rng.integers(0, ell, size=(trials, size), dtype=np.int64)
        classes.sort(axis=1)
        hits = 0
        for row in classes:
            hits += accept(_odd_classes(row).size, size)
        return hits / trials

    small = rate(small_size, lambda N, size: N == size)
    by_size = {b: rate(b, lambda N, size: N > k) for b in big_sizes}
    return LemmaReport(small, min(by_size.values()), by_size, trials, k > 100 and n > ell)


def lift_oracle(f: Oracle, pi: PartitionMap) -> LiftedOracle:
    if pi.n != f.n:
        raise DimensionError(f"partition has n={pi.n}, oracle has n={f.n}")
    return LiftedOracle(f, pi.class_of, pi.ell)


@dataclass(frozen=True)
class TesterParams:
    __test__ = False

    rho: Fraction = Fraction(1, 10)
    c_q: int = 1000
    reduced_n_factor: int = 100
    threshold: Fraction = Fraction(3, 4)
    t_blr: int = blr_rounds()
    decode: DecodeParams = DecodeParams()
    small_k_threshold: int = 4

    def __post_init__(self):
        object.__setattr__(self, "rho", Fraction(self.rho))
        object.__setattr__(self, "threshold", Fraction(self.threshold))
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if not Fraction(1, 2) < self.threshold < 1:
            raise ValueError("threshold must lie in (1/2, 1)")
        if self.c_q < 1 or self.reduced_n_factor < 1 or self.t_blr < 1:
            raise ValueError("c_q, reduced_n_factor and t_blr must be positive")

    def q(self, k: int) -> int:
        """``ceil((c_q / rho) k log2 k)``, at least 1."""
        if k <= 1:
            return 1
        return max(1, math.ceil(float(self.c_q / self.rho) * k * math.log2(k)))

    def reduced_n(self, k: int) -> int:
        return self.reduced_n_factor * k * k

    def fallback_points(self, n: int, k: int) -> int:
        return math.ceil(8 * math.log2(math.comb(n, k))) + 16


@dataclass
class Verdict:
    accept: bool
    identified_support: frozenset[int] | None
    queries_used: int
    stage_reasons: list[str] = field(default_factory=list)
    j_hat: frozenset[int] | None = None
    partition: PartitionMap | None = field(default=None, repr=False)

    def identifies(self, J) -> bool:
        """Whether the identified support corresponds to ``J`` (class-wise when a partition was used)."""
        if self.identified_support is None:
            return False
        J = frozenset(int(j) for j in J)
        if self.partition is None:
            return self.identified_support == J
        classes = [int(self.partition.class_of[j]) for j in sorted(J)]
        return len(set(classes)) == len(J) and frozenset(classes) == self.identified_support

    def unlift(self) -> frozenset[int] | None:
        """Original coordinates whose class was identified."""
        if self.identified_support is None or self.partition is None:
            return self.identified_support
        mask = np.isin(self.partition.class_of, sorted(self.identified_support))
        return frozenset(int(i) for i in np.flatnonzero(mask))

    def to_json(self) -> dict:
        return {
            "accept": self.accept,
            "identified_support": None if self.identified_support is None else sorted(self.identified_support),
            "queries_used": self.queries_used,
            "stage_reasons": list(self.stage_reasons),
        }


def bernoulli_rows(q: int, n: int, p: float, rng: np.random.Generator) -> SparseRows:
    """``q`` rows of i.i.d. Bernoulli(``p``) coordinates over ``[0, n)``, sampled by geometric gaps."""
    total = q * n
    out_ptr = np.zeros(q + 1, dtype=np.int64)
    if p <= 0 or total == 0:
        return SparseRows(out_ptr, np.zeros(0, dtype=np.int64))
    if p >= 1:
        flat = np.arange(total, dtype=np.int64)
    else:
        pieces, last = [], -1
        while True:
            remaining = total - 1 - last
            draw = int(remaining * p + 6 * math.sqrt(remaining * p + 1) + 64)
            pos = last + np.cumsum(rng.geometric(p, size=draw))
            if pos[-1] >= total:
                pieces.append(pos[pos < total])
                break
            pieces.append(pos)
            last = int(pos[-1])
        flat = np.concatenate(pieces)
    rows, cols = np.divmod(flat, n)
    np.cumsum(np.bincount(rows, minlength=q), out=out_ptr[1:])
    return SparseRows(out_ptr, cols)


def reduced_test(f: Oracle, k: int, params: TesterParams = TesterParams(),
                 rng: np.random.Generator | None = None) -> Verdict:
    """Identify the influential variables of the parity near ``f`` and accept iff there are ``k``.

    Uses exactly ``q * 8 * 2 * reps`` queries.
    """
    rng = rng if rng is not None else np.random.default_rng()
    n, q, reps = f.n, params.q(k), params.decode.reps
    start = f.ledger.count
    R = bernoulli_rows(q, n, float(params.rho) / k, rng)

    a = np.zeros(q, dtype=np.uint8)
    step = CHUNK_ROWS
    if f.reads_points:
        step = max(1, min(CHUNK_ROWS, CHUNK_BITS // (VALUES * 2 * reps * n)))
    for lo in range(0, q, step):
        hi = min(q, lo + step)
        chunk = SparseRows(R.indptr[lo : hi + 1] - R.indptr[lo], R.indices[R.indptr[lo] : R.indptr[hi]])
        batch = influence_plan(n, chunk, rng, reps)
        a[lo:hi] = influence_decide(f.evaluate(batch), reps)

    rows = R.row_of_entry()
    sizes = np.bincount(R.indices, minlength=n)
    ones = np.bincount(R.indices, weights=a[rows], minlength=n).astype(np.int64)
    t = params.threshold
    chosen = np.flatnonzero((sizes > 0) & (ones * t.denominator > sizes * t.numerator))
    j_hat = frozenset(int(j) for j in chosen)

    reasons = [f"reduced: n={n} q={q} |J_hat|={len(j_hat)}"]
    empty = int(np.count_nonzero(sizes == 0))
    if empty:
        reasons.append(f"empty-sample-sets: {empty} coordinates never sampled, treated as non-influential")
    return Verdict(
        accept=len(j_hat) == k,
        identified_support=j_hat if len(j_hat) <= k else None,
        queries_used=f.ledger.count - start,
        stage_reasons=reasons,
        j_hat=j_hat,
    )


def _as_int(bits: np.ndarray) -> int:
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def _consistent_support(columns: list[int], target: int, k: int) -> tuple[int, ...] | None:
    """Lexicographically first ``k``-subset of columns whose XOR equals ``target``."""
    n = len(columns)
    if k == 0:
        return () if target == 0 else None
    where: dict[int, list[int]] = {}
    for i, c in enumerate(columns):
        where.setdefault(c, []).append(i)
    for prefix in itertools.combinations(range(n), k - 1):
        acc = target
        for i in prefix:
            acc ^= columns[i]
        lo = prefix[-1] if prefix else -1
        for j in where.get(acc, ()):
            if j > lo:
                return prefix + (j,)
    return None


def fallback_small_k(f: Oracle, n: int, k: int, rng: np.random.Generator | None = None,
                     params: TesterParams = TesterParams()) -> Verdict:
    """Accept iff some weight-``k`` support agrees with self-corrected values at random points.

    Exhaustive over ``C(n, k)`` candidates; meant for ``k <= small_k_threshold``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if f.n != n:
        raise DimensionError(f"oracle has n={f.n}, expected {n}")
    if not 0 <= k <= params.small_k_threshold:
        raise ValueError(f"fallback handles 0 <= k <= {params.small_k_threshold}, got {k}")
    reps = params.decode.reps
    m = params.fallback_points(n, k)
    start = f.ledger.count
    points = QueryBatch.uniform(n, m, rng)
    b = decode_answers(f.evaluate(self_correction_batch(points, reps, rng)), reps)

    bits = unpack_words(points.words(), n)
    columns = [_as_int(col) for col in bits.T]
    target = _as_int(b)
    found = _consistent_support(columns, target, k)
    support = None if found is None else frozenset(found)
    return Verdict(
        accept=found is not None,
        identified_support=support,
        queries_used=f.ledger.count - start,
        stage_reasons=[f"fallback: m={m} consistent={'yes' if found is not None else 'no'}"],
        j_hat=support,
    )


def query_budget(n: int, k: int, params: TesterParams = TesterParams()) -> int:
    """Closed-form query count of :func:`test_k_parity` (input-independent)."""
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    if k > n / 2:
        k = n - k
    blr = 3 * params.t_blr
    reps = params.decode.reps
    if k <= params.small_k_threshold:
        return blr + 2 * reps * params.fallback_points(n, k)
    return blr + VALUES * 2 * reps * params.q(k)


def test_k_parity(f: Oracle, k: int, params: TesterParams = TesterParams(),
                  rng: np.random.Generator | None = None) -> Verdict:
    """Decide whether ``f`` is a ``k``-parity or 1/10-far from every ``k``-parity."""
    rng = rng if rng is not None else np.random.default_rng()
    n = f.n
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    start = f.ledger.count
    reasons: list[str] = []
    dual = k > n / 2
    work, kk = (DualOracle(f), n - k) if dual else (f, k)
    if dual:
        reasons.append(f"dual: testing {n - k}-parity of f(y) xor |y|")

    linear = blr_decide(work.evaluate(blr_batch(n, params.t_blr, rng)))
    reasons.append(f"blr: {'pass' if linear else 'fail'} t={params.t_blr}")

    partition = None
    if kk <= params.small_k_threshold:
        stage = fallback_small_k(work, n, kk, rng, params)
    else:
        ell = params.reduced_n(kk)
        if n > ell:
            partition = random_partition(n, ell, rng)
            reasons.append(f"partition: ell={ell}")
            stage = reduced_test(lift_oracle(work, partition), kk, params, rng)
        else:
            stage = reduced_test(work, kk, params, rng)
    reasons.extend(stage.stage_reasons)

    support = stage.identified_support
    if dual and support is not None:
        if partition is not None:
            reasons.append("dual: class-level support not mapped back, identified_support omitted")
            support = None
        else:
            support = frozenset(range(n)) - support if len(support) == kk else None
    return Verdict(
        accept=linear and stage.accept,
        identified_support=support,
        queries_used=f.ledger.count - start,
        stage_reasons=reasons,
        j_hat=stage.j_hat,
        partition=partition,
    )


test_k_parity.__test__ = False
