"""One-way communication protocols for k-disjointness.

Alice writes to a :class:`OneWayChannel`; Bob only ever receives the frozen
:class:`Transcript` it produces.  Shared randomness is a 64-bit seed both
parties expand independently.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .oracles import Oracle, ParityOracle, ParitySpec
from .points import Batch, mix64


class Outcome(str, enum.Enum):
    DISJOINT = "Disjoint"
    INTERSECTING = "Intersecting"


class AdaptiveTesterError(RuntimeError):
    """The tester's queries changed once it had seen oracle answers."""


@dataclass(frozen=True)
class KSetInstance:
    n: int
    x: frozenset[int]
    y: frozenset[int]
    promise: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "x", frozenset(int(i) for i in self.x))
        object.__setattr__(self, "y", frozenset(int(i) for i in self.y))
        for s in (self.x, self.y):
            if any(not 0 <= i < self.n for i in s):
                raise ValueError(f"set elements must lie in [0, {self.n})")
        if self.promise not in ("none", "unique"):
            raise ValueError(f"unknown promise {self.promise!r}")
        if self.promise == "unique" and len(self.x & self.y) > 1:
            raise ValueError("unique promise violated: |x ∩ y| > 1")

    @property
    def disjoint(self) -> bool:
        return not (self.x & self.y)


@dataclass(frozen=True)
class Transcript:
    bits: tuple[int, ...]
    meta: tuple[tuple[str, int], ...] = ()

    @property
    def count(self) -> int:
        return len(self.bits)

    def to_ascii(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def metadata(self) -> dict:
        return {**dict(self.meta), "bits": self.count}

    def dump(self, path) -> None:
        """Write ``path`` (0/1 characters, no newline) and ``path.json`` (metadata)."""
        path = Path(path)
        path.write_text(self.to_ascii())
        Path(str(path) + ".json").write_text(json.dumps(self.metadata(), sort_keys=True))

    @classmethod
    def load(cls, path) -> Transcript:
        path = Path(path)
        bits = tuple(int(c) for c in path.read_text().strip())
        meta = json.loads(Path(str(path) + ".json").read_text())
        meta.pop("bits", None)
        return cls(bits, tuple(sorted(meta.items())))


class OneWayChannel:
    """Append-only message from Alice; closing it yields Bob's read-only transcript."""

    def __init__(self):
        self._bits: list[int] = []
        self._closed = False

    def send(self, bits: Iterable[int]) -> None:
        if self._closed:
            raise RuntimeError("channel closed: the message has already been delivered")
        self._bits.extend(1 if b else 0 for b in bits)

    def send_uint(self, value: int, width: int) -> None:
        """Fixed-width, most significant bit first."""
        if value < 0 or value >> width:
            raise ValueError(f"{value} does not fit in {width} bits")
        self.send((value >> (width - 1 - i)) & 1 for i in range(width))

    def close(self, **meta: int) -> Transcript:
        self._closed = True
        return Transcript(tuple(self._bits), tuple(sorted(meta.items())))


def read_uint(bits: Sequence[int]) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | b
    return value


def _bitlen(count: int) -> int:
    """Bits to write one of ``count`` values (0 when there is a single value)."""
    return max(0, math.ceil(math.log2(count))) if count > 1 else 0


def _strings(k: int) -> int:
    return 2 * max(1, math.ceil(math.log2(k)))


@dataclass(frozen=True, eq=False)
class SharedBuckets:
    """Bucket map and equality-test strings derived from the public coin."""

    seed: int
    n: int
    b: int
    strings: int
    bucket_of: np.ndarray

    def string_bits(self, positions: np.ndarray) -> np.ndarray:
        """``(len(positions), strings)`` bits ``r_s[p]`` of the per-bucket random strings."""
        positions = np.asarray(positions, dtype=np.uint64)
        buckets = self.bucket_of[positions.astype(np.int64)].astype(np.uint64)
        s = np.arange(self.strings, dtype=np.uint64)[None, :]
        with np.errstate(over="ignore"):
            h = mix64(np.uint64(self.seed) ^ mix64(buckets[:, None] * np.uint64(0x100000001B3) + s)
                      ^ mix64(positions[:, None] + np.uint64(0x632BE59BD9B4E019)))
        return (h & np.uint64(1)).astype(np.uint8)

    def inner_products(self, members: np.ndarray) -> np.ndarray:
        """Inner product of each bucket's content with each string, for buckets touched by ``members``."""
        members = np.asarray(sorted(members), dtype=np.int64)
        buckets = self.bucket_of[members]
        bits = self.string_bits(members)
        order = np.argsort(buckets, kind="stable")
        uniq, first = np.unique(buckets[order], return_index=True)
        ips = np.bitwise_xor.reduceat(bits[order], first, axis=0) if members.size else bits
        return uniq, ips


def derive_buckets(seed: int, n: int, k: int, b: int | None = None,
                   bucketing: str = "slice") -> SharedBuckets:
    """Both parties call this independently with the shared seed.

    ``slice`` ranks positions by a seeded permutation and cuts the ranks into
    ``b`` equal slices; ``hash`` maps every position to a bucket by hashing.
    """
    b = 100 * k * k if b is None else b
    strings = _strings(k)
    rng = np.random.default_rng([seed, n, b])
    if bucketing == "slice":
        rank = rng.permutation(n)
        bucket_of = (rank.astype(np.int64) * b) // n
    elif bucketing == "hash":
        bucket_of = rng.integers(0, b, size=n, dtype=np.int64)
    else:
        raise ValueError(f"unknown bucketing {bucketing!r}")
    return SharedBuckets(seed & (2**64 - 1), n, b, strings, bucket_of)


def index_regime(n: int, k: int) -> bool:
    """True when ``k > sqrt(n/2)``, where Alice just sends the rank of ``x``."""
    return 2 * k * k > n


def rank_subset(x: Iterable[int]) -> int:
    """Colexicographic rank of a subset among subsets of the same size."""
    return sum(math.comb(c, i + 1) for i, c in enumerate(sorted(x)))


def unrank_subset(rank: int, k: int) -> frozenset[int]:
    out = []
    for i in range(k, 0, -1):
        c = i - 1
        while math.comb(c + 1, i) <= rank:
            c += 1
        out.append(c)
        rank -= math.comb(c, i)
    return frozenset(out)


def disjointness_protocol(inst: KSetInstance, shared_seed: int, b: int | None = None,
                          bucketing: str = "slice") -> tuple[Outcome, Transcript]:
    """One-way k-disjointness in ``O(k log k)`` bits.

    Alice sends, for each non-empty bucket, its index and the inner products
    of her bucket with the shared random strings; Bob reports an intersection
    when one of his non-empty buckets matches all received bits.
    """
    k = len(inst.x)
    if len(inst.y) != k:
        raise ValueError(f"both sets must have size k, got {len(inst.x)} and {len(inst.y)}")
    if k < 1:
        raise ValueError("the sets must be non-empty")
    n = inst.n
    channel = OneWayChannel()

    if index_regime(n, k):
        width = _bitlen(math.comb(n, k))
        channel.send_uint(rank_subset(inst.x), width)
        transcript = channel.close(k=k, n=n, b=0)
        x = unrank_subset(read_uint(transcript.bits), k)
        return (Outcome.DISJOINT if not (x & inst.y) else Outcome.INTERSECTING), transcript

    # Alice
    alice = derive_buckets(shared_seed, n, k, b, bucketing)
    width = _bitlen(alice.b)
    buckets, ips = alice.inner_products(np.fromiter(inst.x, dtype=np.int64))
    for bucket, row in zip(buckets.tolist(), ips):
        channel.send_uint(bucket, width)
        channel.send(row.tolist())
    transcript = channel.close(k=k, n=n, b=alice.b)

    return _bob_disjointness(transcript, inst.y, shared_seed, n, k, b, bucketing), transcript


def _bob_disjointness(transcript: Transcript, y: frozenset[int], shared_seed: int, n: int, k: int,
                      b: int | None, bucketing: str) -> Outcome:
    bob = derive_buckets(shared_seed, n, k, b, bucketing)
    width = _bitlen(bob.b)
    entry = width + bob.strings
    mine_b, mine_ips = bob.inner_products(np.fromiter(y, dtype=np.int64))
    mine = {int(bk): tuple(row.tolist()) for bk, row in zip(mine_b, mine_ips)}
    bits = transcript.bits
    for start in range(0, len(bits) - entry + 1, entry):
        bucket = read_uint(bits[start : start + width])
        if mine.get(bucket) == tuple(bits[start + width : start + entry]):
            return Outcome.INTERSECTING
    return Outcome.DISJOINT


def transcript_bound(k: int, b: int | None = None) -> int:
    """``k (ceil(log2 b) + 2 ceil(log2 k))`` with ``b = 100 k^2``; at ``k = 1`` two strings are still sent."""
    b = 100 * k * k if b is None else b
    return k * (_bitlen(b) + _strings(k))


# tester -> protocol reduction

TesterFactory = Callable[[int, int, int], Callable[[Oracle], bool]]


class _AliceOracle(Oracle):
    kind = "alice"
    reads_points = False

    def __init__(self, spec: ParitySpec, channel: OneWayChannel):
        super().__init__(spec.n)
        self._f = ParityOracle(spec, self.ledger)
        self.channel = channel
        self.fingerprints: list[bytes] = []

    def evaluate(self, batch: Batch) -> np.ndarray:
        answers = self._f.evaluate(batch)
        self.fingerprints.append(batch.fingerprint())
        self.channel.send(answers.tolist())
        return answers


class _BobOracle(Oracle):
    """Answers ``h = f XOR g`` from Alice's bits and Bob's own parity ``g``."""

    kind = "bob"
    reads_points = False

    def __init__(self, spec: ParitySpec, transcript: Transcript, expected: list[bytes]):
        super().__init__(spec.n)
        self._g = ParityOracle(spec, self.ledger)
        self._bits = np.asarray(transcript.bits, dtype=np.uint8)
        self._expected = expected
        self._pos = 0
        self._calls = 0

    def evaluate(self, batch: Batch) -> np.ndarray:
        call = self._calls
        self._calls += 1
        if call >= len(self._expected) or batch.fingerprint() != self._expected[call]:
            raise AdaptiveTesterError(
                f"query batch {call} differs from the one fixed by the shared coin")
        m = len(batch)
        alice = self._bits[self._pos : self._pos + m]
        self._pos += m
        return alice ^ self._g.evaluate(batch)


def tester_to_protocol(inst: KSetInstance, tester_factory: TesterFactory,
                       shared_seed: int) -> tuple[Outcome, Transcript]:
    """Run a non-adaptive k-parity tester as a one-way protocol for (k/2)-disjointness.

    The shared seed fixes the tester; Alice sends ``chi_x(z)`` for each of its
    query points and Bob runs the tester on ``h = chi_x XOR chi_y``, which is a
    ``(k - 2|x ∩ y|)``-parity.  Accept means disjoint.
    """
    half = len(inst.x)
    if len(inst.y) != half:
        raise ValueError("both sets must have size k/2")
    n, k = inst.n, 2 * half
    channel = OneWayChannel()

    alice_oracle = _AliceOracle(ParitySpec(n, inst.x), channel)
    tester_factory(n, k, shared_seed)(alice_oracle)
    transcript = channel.close(k=k, n=n, b=0)

    bob_oracle = _BobOracle(ParitySpec(n, inst.y), transcript, alice_oracle.fingerprints)
    accept = tester_factory(n, k, shared_seed)(bob_oracle)
    if bob_oracle._pos != transcript.count:
        raise AdaptiveTesterError("tester asked fewer queries than the shared coin fixed")
    return (Outcome.DISJOINT if accept else Outcome.INTERSECTING), transcript


tester_to_protocol.__test__ = False


def kparity_tester_factory(params=None) -> TesterFactory:
    """Factory running :func:`kparity.tester.test_k_parity` with a seed-fixed rng."""
    from .tester import TesterParams, test_k_parity

    params = TesterParams() if params is None else params

    def factory(n: int, k: int, seed: int):
        def run(oracle: Oracle) -> bool:
            return test_k_parity(oracle, k, params, np.random.default_rng(seed)).accept
        return run

    return factory


def exact_decider_factory() -> TesterFactory:
    """Queries every point and accepts iff the function is exactly a k-parity (n <= 20)."""
    from .fourier import distance_to_k_parities
    from .points import DenseBatch

    def factory(n: int, k: int, seed: int):
        def run(oracle: Oracle) -> bool:
            table = oracle.evaluate(DenseBatch.all_points(n))
            return distance_to_k_parities(table, k, n) == 0
        return run

    return factory


# random-access-code instances

def _block(n: int, k: int) -> int:
    if k < 1 or n // k < 1:
        raise ValueError(f"cannot split n={n} into {k} blocks")
    return n // k


def rac_bits(k: int) -> int:
    """Bits per message integer: ``ceil(log2(2k))``."""
    return max(1, math.ceil(math.log2(2 * k)))


def rac_encode(M: Sequence[int], n: int) -> frozenset[int]:
    """One 1 per block, at offset ``m_i`` of block ``i`` (block size ``n // k``, tail unused)."""
    k = len(M)
    block = _block(n, k)
    if block < 2 * k:
        raise ValueError(f"blocks of size {block} cannot hold offsets below 2k={2 * k}")
    for m in M:
        if not 0 <= m < 2 * k:
            raise ValueError(f"message entries must lie in [0, {2 * k}), got {m}")
    return frozenset(i * block + int(m) for i, m in enumerate(M))


def rac_probe(i: int, ell: int, n: int, k: int) -> frozenset[int]:
    """Bob's set for recovering bit ``ell`` of ``m_i``: offsets ``j < 2k`` of block ``i`` with that bit set.

    When ``k`` is not a power of two the set is padded to size ``k`` with
    offsets at or beyond ``2k`` of block ``i``, which Alice never uses.
    """
    block = _block(n, k)
    if not 0 <= i < k:
        raise ValueError(f"block index {i} out of range")
    if not 0 <= ell < rac_bits(k):
        raise ValueError(f"bit index {ell} out of range")
    offsets = [j for j in range(2 * k) if (j >> ell) & 1]
    extra = k - len(offsets)
    if extra > 0:
        spare = list(range(block - 1, 2 * k - 1, -1))
        if len(spare) < extra:
            raise ValueError(f"block of size {block} has no room to pad the probe to size {k}")
        offsets += spare[:extra]
    return frozenset(i * block + j for j in offsets)


def _wide_layout(n: int, k: int) -> tuple[int, int]:
    block = _block(n, k)
    reserve = k - block // 2
    alice_range = block - reserve
    if reserve < 0 or alice_range < 2:
        raise ValueError(f"n={n}, k={k} leaves no room for the wide construction")
    return block, alice_range


def rac_encode_wide(M: Sequence[int], n: int) -> frozenset[int]:
    """Encoding for ``k > sqrt(n/2)``: offsets ``m_i`` below ``n/k - (k - n/2k)``.

    The last ``k - n/(2k)`` offsets of every block are left free for Bob's padding.
    """
    k = len(M)
    block, alice_range = _wide_layout(n, k)
    for m in M:
        if not 0 <= m < alice_range:
            raise ValueError(f"wide message entries must lie in [0, {alice_range}), got {m}")
    return frozenset(i * block + int(m) for i, m in enumerate(M))


def rac_probe_wide(i: int, ell: int, n: int, k: int) -> frozenset[int]:
    """Probe matching :func:`rac_encode_wide`; padding fills reserved tails, block ``i`` first."""
    block, alice_range = _wide_layout(n, k)
    if not 0 <= i < k:
        raise ValueError(f"block index {i} out of range")
    if not 0 <= ell < max(1, math.ceil(math.log2(alice_range))):
        raise ValueError(f"bit index {ell} out of range")
    chosen = [i * block + j for j in range(alice_range) if (j >> ell) & 1]
    for b in [i] + [c for c in range(k) if c != i]:
        for j in range(block - 1, alice_range - 1, -1):
            if len(chosen) >= k:
                break
            chosen.append(b * block + j)
    if len(chosen) < k:
        raise ValueError("not enough reserved positions to pad the probe")
    return frozenset(chosen[:k])


DisjointnessProtocol = Callable[[KSetInstance, int], tuple[Outcome, Transcript]]


@dataclass(frozen=True)
class RacReport:
    rates: np.ndarray
    message_bits: np.ndarray
    transcript_bits: tuple[int, ...]

    @property
    def min_rate(self) -> float:
        return float(self.rates.min())


def rac_roundtrip(M: Sequence[int], n: int, protocol: DisjointnessProtocol, trials: int,
                  seeds: Sequence[int] | None = None) -> RacReport:
    """Recover every bit of ``M`` through ``protocol`` on (encode(M), probe(i, ell)) pairs.

    ``rates[i, ell]`` is the fraction of seeds on which bit ``ell`` of ``m_i`` came back correctly.
    """
    k = len(M)
    x = rac_encode(M, n)
    width = rac_bits(k)
    seeds = list(range(trials)) if seeds is None else list(seeds)[:trials]
    truth = np.array([[(m >> ell) & 1 for ell in range(width)] for m in M], dtype=np.uint8)
    correct = np.zeros((k, width), dtype=np.int64)
    lengths = set()
    for i in range(k):
        for ell in range(width):
            inst = KSetInstance(n, x, rac_probe(i, ell, n, k), promise="unique")
            for seed in seeds:
                outcome, transcript = protocol(inst, seed)
                lengths.add(transcript.count)
                bit = 1 if outcome is Outcome.INTERSECTING else 0
                correct[i, ell] += bit == truth[i, ell]
    return RacReport(correct / len(seeds), truth, tuple(sorted(lengths)))
