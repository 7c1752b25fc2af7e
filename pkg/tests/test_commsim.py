import itertools
import json
import math

import numpy as np
import pytest

from kparity.commsim import (
    AdaptiveTesterError,
    KSetInstance,
    OneWayChannel,
    Outcome,
    Transcript,
    derive_buckets,
    disjointness_protocol,
    exact_decider_factory,
    index_regime,
    rac_bits,
    rac_encode,
    rac_encode_wide,
    rac_probe,
    rac_probe_wide,
    rac_roundtrip,
    rank_subset,
    read_uint,
    tester_to_protocol,
    transcript_bound,
    unrank_subset,
)
from kparity.points import DenseBatch, QueryBatch

import reference


def blocks(n, k, bits):
    block = n // k
    return " ".join("".join("1" if i * block + j in bits else "0" for j in range(block)) for i in range(k))


def test_instance_validation():
    with pytest.raises(ValueError):
        KSetInstance(4, {4}, {0})
    with pytest.raises(ValueError):
        KSetInstance(10, {1, 2}, {1, 2}, promise="unique")
    assert KSetInstance(10, {1}, {2}).disjoint


def test_channel_is_one_way():
    ch = OneWayChannel()
    ch.send_uint(5, 4)
    t = ch.close(k=1)
    assert t.to_ascii() == "0101" and read_uint(t.bits) == 5
    with pytest.raises(RuntimeError):
        ch.send([1])
    assert not hasattr(t, "send")
    with pytest.raises(Exception):
        t.bits = ()
    with pytest.raises(ValueError):
        OneWayChannel().send_uint(16, 4)


def test_transcript_dump_format(tmp_path):
    t = Transcript((1, 0, 1), (("b", 7), ("k", 2), ("n", 9)))
    path = tmp_path / "msg"
    t.dump(path)
    assert path.read_text() == "101"
    assert json.loads((tmp_path / "msg.json").read_text()) == {"b": 7, "k": 2, "n": 9, "bits": 3}
    assert Transcript.load(path) == t


def test_shared_randomness_is_consistent():
    for seed in range(1000):
        a = derive_buckets(seed, 300, 3)
        b = derive_buckets(seed, 300, 3)
        assert np.array_equal(a.bucket_of, b.bucket_of)
        pos = np.arange(0, 300, 37)
        assert np.array_equal(a.string_bits(pos), b.string_bits(pos))


def test_slice_buckets_are_equal_sized():
    sb = derive_buckets(1, 1000, 2, b=100)
    assert np.bincount(sb.bucket_of, minlength=100).tolist() == [10] * 100
    hb = derive_buckets(1, 1000, 2, b=100, bucketing="hash")
    assert hb.bucket_of.max() < 100
    with pytest.raises(ValueError):
        derive_buckets(1, 10, 2, bucketing="other")


@pytest.mark.parametrize("k", [1, 2, 5])
def test_rank_roundtrip(k):
    for S in itertools.combinations(range(9), k):
        assert unrank_subset(rank_subset(S), k) == frozenset(S)
    ranks = sorted(rank_subset(S) for S in itertools.combinations(range(9), k))
    assert ranks == list(range(math.comb(9, k)))


def test_transcript_bound_value():
    assert transcript_bound(16) == 16 * (15 + 8) == 368
    assert transcript_bound(1) == 7 + 2
    _, t = disjointness_protocol(KSetInstance(100, {3}, {4}), 0)
    assert t.count == transcript_bound(1)


def test_protocol_example_runs(rng):
    for _ in range(200):
        pool = rng.choice(1024, size=32, replace=False)
        x, y = pool[:16], pool[16:]
        out, t = disjointness_protocol(KSetInstance(1024, x, y), int(rng.integers(2**63)))
        assert t.count <= 368
        y2 = list(y)
        y2[0] = x[3]
        out2, _ = disjointness_protocol(KSetInstance(1024, x, y2, "unique"), int(rng.integers(2**63)))
        assert out2 is Outcome.INTERSECTING
    assert t.metadata()["k"] == 16 and t.metadata()["b"] == 25600


def test_protocol_with_hash_buckets(rng):
    x, y = {1, 2, 3}, {3, 50, 60}
    out, _ = disjointness_protocol(KSetInstance(500, x, y), 7, bucketing="hash")
    assert out is Outcome.INTERSECTING


def test_index_regime():
    assert index_regime(20, 4) and not index_regime(1024, 16)
    inst = KSetInstance(20, {0, 5, 9, 13}, {1, 2, 3, 13})
    out, t = disjointness_protocol(inst, 0)
    assert out is Outcome.INTERSECTING and t.count == math.ceil(math.log2(math.comb(20, 4)))
    assert disjointness_protocol(KSetInstance(20, {0, 5, 9, 13}, {1, 2, 3, 4}), 0)[0] is Outcome.DISJOINT
    with pytest.raises(ValueError):
        disjointness_protocol(KSetInstance(20, set(), set()), 0)
    with pytest.raises(ValueError):
        disjointness_protocol(KSetInstance(20, {1}, {2, 3}), 0)


def test_rac_worked_example():
    x = rac_encode([1, 7, 0, 5], 40)
    assert blocks(40, 4, x) == "0100000000 0000000100 1000000000 0000010000"
    assert len(x & rac_probe(0, 0, 40, 4)) == 1
    assert sorted(j - 10 for j in rac_probe(1, 0, 40, 4)) == [1, 3, 5, 7]
    assert rac_encode([0, 0, 0, 0], 40) == {0, 10, 20, 30}
    with pytest.raises(ValueError):
        rac_encode([8, 0, 0, 0], 40)
    with pytest.raises(ValueError):
        rac_probe(4, 0, 40, 4)
    with pytest.raises(ValueError):
        rac_probe(0, 3, 40, 4)


@pytest.mark.parametrize("k", range(1, 9))
def test_rac_unique_promise_exhaustive(k):
    n = k * (2 * k + k)
    width = rac_bits(k)
    probes = {(i, ell): rac_probe(i, ell, n, k) for i in range(k) for ell in range(width)}
    assert all(len(p) == k for p in probes.values())
    for m in range(2 * k):
        for i in range(k):
            M = [0] * k
            M[i] = m
            x = rac_encode(M, n)
            for ell in range(width):
                assert len(x & probes[(i, ell)]) == (m >> ell) & 1


def test_rac_wide_variant():
    n, k = 72, 8
    M = [0, 1, 2, 3, 4, 3, 2, 1]
    x = rac_encode_wide(M, n)
    for i in range(k):
        for ell in range(2):
            y = rac_probe_wide(i, ell, n, k)
            assert len(y) == k
            assert len(x & y) == (M[i] >> ell) & 1


def test_rac_roundtrip_and_baseline():
    M = [3, 0, 7, 5]
    rep = rac_roundtrip(M, 64, lambda inst, seed: disjointness_protocol(inst, seed), trials=5)
    assert rep.min_rate == 1.0 and len(rep.transcript_bits) == 1

    def always_disjoint(inst, seed):
        return Outcome.DISJOINT, Transcript(())

    base = rac_roundtrip(M, 64, always_disjoint, trials=2)
    assert np.array_equal(base.rates, 1 - base.message_bits)


def test_reduction_answers_are_chi_x_xor_chi_y():
    n = 8
    seen = []

    def factory(n_, k, seed):
        def run(oracle):
            seen.append(oracle.evaluate(DenseBatch.all_points(n_)))
            return True
        return run

    for x, y in [({0}, {0}), ({1, 2}, {2, 7}), ({3}, {5})]:
        seen.clear()
        tester_to_protocol(KSetInstance(n, x, y), factory, 0)
        assert seen[1].tolist() == reference.parity_table(n, set(x) ^ set(y)).tolist()


def test_reduction_with_exact_decider():
    dec = exact_decider_factory()
    assert tester_to_protocol(KSetInstance(6, {0, 1}, {2, 3}), dec, 0)[0] is Outcome.DISJOINT
    out, t = tester_to_protocol(KSetInstance(6, {0, 1}, {1, 3}), dec, 0)
    assert out is Outcome.INTERSECTING and t.count == 64


def test_adaptive_tester_is_caught():
    def adaptive(n, k, seed):
        def run(oracle):
            first = oracle.evaluate(QueryBatch.uniform(n, 4, np.random.default_rng(seed)))
            rng = np.random.default_rng(seed + int(first.sum()))
            return bool(oracle.evaluate(QueryBatch.uniform(n, 4, rng)).any())
        return run

    with pytest.raises(AdaptiveTesterError):
        for seed in range(50):
            tester_to_protocol(KSetInstance(30, {0, 1}, {5, 6}), adaptive, seed)
