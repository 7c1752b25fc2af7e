"""Acceptance criteria 1-12, each at its stated tolerance.

Every test emits one ``criterion N: PASS|FAIL`` line (collected in the
terminal summary) before asserting.
"""
import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from kparity.commsim import (
    KSetInstance,
    Outcome,
    disjointness_protocol,
    exact_decider_factory,
    rac_bits,
    rac_encode,
    rac_probe,
    rac_roundtrip,
    tester_to_protocol,
    transcript_bound,
)
from kparity.fourier import nearest_k_parity, walsh_coefficients
from kparity.hadamard import DecodeParams, self_correct_many
from kparity.harness.experiments import ExperimentConfig, run_trials
from kparity.harness.stats import binomial_sigma
from kparity.influence import influence_test, influence_tests, noisy_influence_test, noisy_influence_tests
from kparity.oracles import ParityOracle, ParitySpec, TruthTableOracle, make_noisy_parity, truth_table
from kparity.points import DenseBatch, Point, SparseRows
from kparity.tester import (
    TesterParams,
    check_partition_lemma,
    lift_oracle,
    odd_occupancy,
    query_budget,
    random_partition,
    test_k_parity as run_tester,
)

import reference


def rows_from_masks(masks: np.ndarray, n: int, copies: int) -> SparseRows:
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    bits = np.repeat(bits, copies, axis=0)
    indptr = np.zeros(bits.shape[0] + 1, dtype=np.int64)
    np.cumsum(bits.sum(axis=1), out=indptr[1:])
    return SparseRows(indptr, np.nonzero(bits)[1].astype(np.int64))


def subsets_of(mask: int) -> np.ndarray:
    out, sub = [], mask
    while True:
        out.append(sub)
        if sub == 0:
            return np.array(out, dtype=np.int64)
        sub = (sub - 1) & mask


def test_criterion_01_influence_contract(report):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    positives = 0
    checked = 0
    for n, copies in ((8, 1000), (10, 10)):
        full = (1 << n) - 1
        for J in range(1 << n):
            f = ParityOracle(ParitySpec(n, [i for i in range(n) if J >> i & 1]))
            xs = rows_from_masks(subsets_of(full ^ J), n, copies)
            out = influence_tests(f, xs, rng)
            positives += int(out.sum())
            checked += len(xs)
            assert f.ledger.count == 8 * len(xs)

    n, trials = 10, 100_000
    hits = 0
    for _ in range(trials // 1000):
        J = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
        f = ParityOracle(ParitySpec(n, J))
        masks = rng.integers(1, 1 << n, size=4000)
        jm = reference.point_int(J)
        masks = masks[(masks & jm) != 0][:1000]
        assert masks.size == 1000
        hits += int(influence_tests(f, rows_from_masks(masks, n, 1), rng).sum())
    rate = hits / trials

    g = ParityOracle(ParitySpec(10, {0, 3}))
    influence_test(g, Point.from_indices(10, [3, 4]), rng)
    elapsed = time.perf_counter() - start
    ok = positives == 0 and rate >= 0.99 and g.ledger.count == 8 and elapsed < 60
    report(1, ok, f"false positives {positives}/{checked}, detection {rate:.4f} >= 0.99, "
                  f"ledger {g.ledger.count}, {elapsed:.1f}s")
    assert ok


def test_criterion_02_noisy_influence(report):
    rng = np.random.default_rng(2)
    n, trials, per = 12, 10_000, 100
    start = time.perf_counter()
    errors = {}
    for intersect in (False, True):
        wrong = 0
        for _ in range(trials // per):
            J = rng.choice(n, size=int(rng.integers(1, n)), replace=False)
            f = make_noisy_parity(ParitySpec(n, J), 0.1, int(rng.integers(2**62)), mode="exact")
            rest = np.setdiff1d(np.arange(n), J)
            xs = []
            for _ in range(per):
                x = set(rng.choice(rest, size=int(rng.integers(0, rest.size + 1)), replace=False).tolist())
                if intersect:
                    x |= set(rng.choice(J, size=int(rng.integers(1, J.size + 1)), replace=False).tolist())
                xs.append(x)
            out = noisy_influence_tests(f, SparseRows.from_sets(xs), rng)
            wrong += int(np.count_nonzero(out != int(intersect)))
            assert f.ledger.count == 640 * per
        errors[intersect] = wrong / trials
    g = make_noisy_parity(ParitySpec(n, {1}), 0.1, 0, mode="exact")
    noisy_influence_test(g, Point.from_indices(n, [1]), rng)
    bound = 0.02 + 3 * binomial_sigma(0.02, trials)
    elapsed = time.perf_counter() - start
    ok = max(errors.values()) <= bound and g.ledger.count == 640 and elapsed < 300
    report(2, ok, f"false positive {errors[False]:.4f}, false negative {errors[True]:.4f} "
                  f"<= {bound:.4f}, ledger {g.ledger.count}, {elapsed:.1f}s")
    assert ok


def test_criterion_03_self_correction(report):
    rng = np.random.default_rng(3)
    n, samples = 12, 100_000
    lines, ok = [], True
    for rate in (0.05, 0.1):
        spec = ParitySpec(n, {0, 4, 9})
        f = make_noisy_parity(spec, rate, 17, mode="exact")
        g_spec, dist = nearest_k_parity(f, 3)
        assert g_spec == spec and dist == Fraction(round(Fraction(str(rate)) * 4096), 4096)
        masks = rng.integers(0, 1 << n, size=samples)
        got = self_correct_many(f, rows_from_masks(masks, n, 1), DecodeParams(1), rng)
        want = reference.parity_table(n, spec.support)[masks]
        freq = float(np.mean(got == want))
        floor = 1 - 2 * float(dist)
        slack = 3 * binomial_sigma(floor, samples)
        ok &= freq >= floor - slack
        lines.append(f"dist {dist}: {freq:.4f} >= {floor - slack:.4f}")
    report(3, ok, "; ".join(lines))
    assert ok


def test_criterion_04_partition_lemma(report):
    k = 128
    n = 100 * k * k + 1
    start = time.perf_counter()
    rep = check_partition_lemma(n, k, 10_000, np.random.default_rng(4))
    elapsed = time.perf_counter() - start
    ok = rep.rate_small > 0.9 and rep.rate_big > 0.9 and rep.in_lemma_range and elapsed < 300
    sizes = ", ".join(f"|J|={s}: {r:.4f}" for s, r in rep.rate_big_by_size.items())
    report(4, ok, f"rate_small {rep.rate_small:.4f}, rate_big {rep.rate_big:.4f} ({sizes}), {elapsed:.1f}s")
    assert ok


def test_criterion_05_lifting_identity(report):
    rng = np.random.default_rng(5)
    checked = 0
    ok = True
    for n in range(1, 13):
        masks = np.arange(1 << n, dtype=np.int64)
        for ell in range(1, 7):
            for _ in range(2):
                pi = random_partition(n, ell, rng)
                z = np.arange(1 << ell, dtype=np.int64)
                expand = np.zeros(1 << ell, dtype=np.int64)
                for i in range(n):
                    expand |= ((z >> int(pi.class_of[i])) & 1) << i
                direct = np.bitwise_count(masks[:, None] & expand[None, :]) & 1
                for J in range(1 << n):
                    S = [i for i in range(n) if J >> i & 1]
                    lifted = truth_table(lift_oracle(ParityOracle(ParitySpec(n, S)), pi))
                    N = odd_occupancy(pi, S)
                    support = reference.odd_classes(S, pi.class_of)
                    ok &= N == len(support) and N % 2 == len(S) % 2
                    ok &= np.array_equal(lifted, direct[J])
                    ok &= np.array_equal(lifted, reference.parity_table(ell, support))
                    checked += 1
    report(5, bool(ok), f"{checked} (J, partition) pairs, n <= 12, ell <= 6")
    assert ok


@pytest.fixture(scope="module")
def scaled_tester_runs():
    base = dict(scenario="test", n=1 << 14, k=8, trials=100, seed=6, c_q=40, reps=10)
    start = time.perf_counter()
    exact = run_trials(ExperimentConfig(family="exact-k-parity", **base))
    below = run_trials(ExperimentConfig(family="l-parity", ell=7, **base))
    above = run_trials(ExperimentConfig(family="l-parity", ell=9, **base))
    return exact, below, above, time.perf_counter() - start


def test_criterion_06_end_to_end(report, scaled_tester_runs):
    exact, below, above, elapsed = scaled_tester_runs
    n, k = 1 << 14, 8
    params = TesterParams()
    J = frozenset(np.random.default_rng(60).choice(n, size=k, replace=False).tolist())
    f = ParityOracle(ParitySpec(n, J))
    smoke = run_tester(f, k, params, np.random.default_rng(61))
    expected = 3 * params.t_blr + 640 * params.q(k)
    ok = (exact.estimate >= 0.9 and below.estimate >= 0.9 and above.estimate >= 0.9 and elapsed < 600
          and smoke.accept and f.ledger.count == smoke.queries_used == expected)
    report(6, ok, f"accept on 8-parities {exact.estimate:.2f}, reject on 7-parities {below.estimate:.2f}, "
                  f"on 9-parities {above.estimate:.2f} ({elapsed:.0f}s); default-constant smoke "
                  f"accept={smoke.accept} ledger {f.ledger.count} == {expected}")
    assert ok


def test_criterion_07_identification(report, scaled_tester_runs):
    exact = scaled_tester_runs[0]
    identified, accepted = exact.identified
    ok = accepted > 0 and identified / accepted >= 0.95
    report(7, ok, f"identified {identified}/{accepted} accepting runs")
    assert ok


def test_criterion_08_query_scaling(report):
    lines, ok = [], True
    n = 1 << 14
    for k in (8, 16, 32, 64):
        params = TesterParams(c_q=1)
        J = np.random.default_rng(k).choice(n, size=k, replace=False)
        f = ParityOracle(ParitySpec(n, J))
        v = run_tester(f, k, params, np.random.default_rng(80 + k))
        closed = 640 * params.q(k) + 3 * params.t_blr
        ok &= f.ledger.count == v.queries_used == closed == query_budget(n, k, params)
        lines.append(f"k={k}: {f.ledger.count}={closed}")
    report(8, bool(ok), "c_q=1, reps=40: " + ", ".join(lines))
    assert ok


def test_criterion_09_disjointness(report):
    k, n, trials = 16, 1024, 10_000
    disjoint = run_trials(ExperimentConfig(scenario="comm", family="disjoint-pair", n=n, k=k, trials=trials, seed=9))
    unique = run_trials(ExperimentConfig(scenario="comm", family="unique-intersect-pair", n=n, k=k,
                                         trials=trials, seed=10))
    bound = k * (math.ceil(math.log2(100 * k * k)) + 2 * math.ceil(math.log2(k)))
    longest = max(disjoint.max_cost, unique.max_cost)
    ok = disjoint.estimate >= 0.9 and unique.estimate >= 0.95 and longest <= bound == transcript_bound(k)
    report(9, ok, f"disjoint {disjoint.estimate:.4f}, unique-intersect {unique.estimate:.4f}, "
                  f"max bits {longest} <= {bound}")
    assert ok


def _reduction_cases():
    for n in range(2, 17):
        for x, y in itertools.product(range(n), repeat=2):
            yield n, (x,), (y,)
    for n in range(4, 13):
        pairs = list(itertools.combinations(range(n), 2))
        for x, y in itertools.product(pairs, repeat=2):
            yield n, x, y
    pairs16 = list(itertools.combinations(range(16), 2))
    for y in pairs16:
        yield 16, (0, 1), y
    rng = np.random.default_rng(10)
    for _ in range(200):
        a, b = rng.integers(len(pairs16), size=2)
        yield 16, pairs16[a], pairs16[b]


def test_criterion_10_reduction_semantics(report):
    decider = exact_decider_factory()
    seen = []

    def recording(n, k, seed):
        run = decider(n, k, seed)

        def wrapped(oracle):
            seen.append(oracle.evaluate(DenseBatch.all_points(n)))
            return run(oracle)
        return wrapped

    cases = mismatched = wrong = 0
    for n, x, y in _reduction_cases():
        seen.clear()
        out, transcript = tester_to_protocol(KSetInstance(n, x, y), recording, 0)
        h = seen[1]
        table = np.bitwise_count(np.arange(1 << n, dtype=np.int64) & reference.point_int(set(x) ^ set(y))) & 1
        mismatched += not np.array_equal(h, table)
        wrong += (out is Outcome.DISJOINT) != (not set(x) & set(y))
        cases += 1
    ok = mismatched == 0 and wrong == 0
    report(10, ok, f"{cases} instances: pointwise mismatches {mismatched}, verdict errors {wrong}")
    assert ok


def test_criterion_11_rac_roundtrip(report):
    k, n = 16, 1024
    rng = np.random.default_rng(11)
    rates = []
    for _ in range(3):
        M = [int(m) for m in rng.integers(0, 2 * k, size=k)]
        rep = rac_roundtrip(M, n, disjointness_protocol, trials=100,
                            seeds=[int(s) for s in rng.integers(0, 2**62, size=100)])
        rates.append(rep.min_rate)
    unique = True
    for i in range(k):
        for m in range(2 * k):
            M = [0] * k
            M[i] = m
            x = rac_encode(M, n)
            for ell in range(rac_bits(k)):
                size = len(x & rac_probe(i, ell, n, k))
                unique &= size <= 1 and size == (m >> ell) & 1
    ok = min(rates) >= 0.9 and unique
    report(11, ok, f"min per-bit recovery {min(rates):.3f} over 3 messages; |x & y| <= 1 for all probes: {unique}")
    assert ok


def test_criterion_12_wht_oracle(report):
    rng = np.random.default_rng(12)
    bad = 0
    worst = 0.0
    for n in range(1, 13):
        for ell in range(n + 1):
            support = rng.choice(n, size=ell, replace=False)
            table = truth_table(ParityOracle(ParitySpec(n, support)))
            for k in range(n + 1):
                _, dist = nearest_k_parity(table, k, n)
                bad += dist != (0 if ell == k else Fraction(1, 2))
            c = walsh_coefficients(table).astype(float) / (1 << n)
            worst = max(worst, abs(float(np.sum(c * c)) - 1))
        f = TruthTableOracle.random(n, rng)
        c = walsh_coefficients(f).astype(float) / (1 << n)
        worst = max(worst, abs(float(np.sum(c * c)) - 1))
    ok = bad == 0 and worst < 1e-9
    report(12, ok, f"distance mismatches {bad}, max Parseval error {worst:.1e}")
    assert ok
