from fractions import Fraction

import numpy as np
import pytest

from kparity.fourier import nearest_k_parity
from kparity.hadamard import (
    DecodeParams,
    blr_linearity_test,
    blr_rounds,
    majority,
    self_correct,
    self_correct_many,
)
from kparity.oracles import ParityOracle, ParitySpec, TruthTableOracle, make_noisy_parity
from kparity.points import Point, SparseRows


def test_majority_ties_count_as_one():
    assert majority(np.array([[0, 1], [0, 0], [1, 1]])).tolist() == [1, 0, 1]


def test_blr_rounds_default():
    t = blr_rounds()
    assert t == 44
    assert Fraction(9, 10) ** t <= Fraction(1, 100) < Fraction(9, 10) ** (t - 1)
    with pytest.raises(ValueError):
        blr_rounds(0)


def test_decode_params():
    assert DecodeParams().queries_per_value == 80
    with pytest.raises(ValueError):
        DecodeParams(0)


def test_self_correct_exact_parity(rng):
    spec = ParitySpec(300, {3, 77, 250})
    f = ParityOracle(spec)
    for _ in range(20):
        x = Point.random(300, rng)
        assert self_correct(f, x, DecodeParams(3), rng) == spec.eval(x)
    assert f.ledger.count == 20 * 6


def test_self_correct_noisy_parity(rng):
    spec = ParitySpec(12, {0, 6})
    f = make_noisy_parity(spec, 0.1, seed=2, mode="exact")
    xs = [rng.choice(12, size=int(rng.integers(0, 13)), replace=False) for _ in range(500)]
    got = self_correct_many(f, SparseRows.from_sets(xs), DecodeParams(40), rng)
    want = [spec.eval(Point.from_indices(12, x)) for x in xs]
    assert np.mean(got == np.array(want)) > 0.98
    assert f.ledger.count == 500 * 80


def test_blr_never_rejects_a_parity(rng):
    f = ParityOracle(ParitySpec(1000, set(range(0, 1000, 7))))
    assert all(blr_linearity_test(f, rng=rng) for _ in range(50))
    assert f.ledger.count == 50 * 3 * 44


def test_blr_rejects_far_functions(rng):
    far = 0
    for _ in range(30):
        f = TruthTableOracle.random(10, rng)
        assert nearest_k_parity(f, 5)[1] > Fraction(1, 10)
        far += not blr_linearity_test(f, rng=rng)
    assert far >= 29
