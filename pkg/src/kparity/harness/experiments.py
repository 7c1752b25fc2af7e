"""Seeded Monte-Carlo scenarios and scaling sweeps.

Trial ``i`` of a run with root seed ``s`` draws all of its randomness from
``SeedSequence(s, spawn_key=(i,))``, so results do not depend on how trials
are scheduled across workers.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np

from ..commsim import (
    KSetInstance,
    Outcome,
    disjointness_protocol,
    kparity_tester_factory,
    rac_bits,
    rac_encode,
    rac_probe,
    tester_to_protocol,
)
from ..hadamard import DecodeParams, blr_rounds
from ..influence import influence_test, noisy_influence_test
from ..oracles import (
    ParityOracle,
    ParitySpec,
    make_noisy_parity,
    random_function,
    sample_support,
)
from ..points import Point
from ..tester import TesterParams, random_partition, test_k_parity
from .stats import TrialStats

SCENARIOS = ("test", "infl", "partition-check", "comm", "reduce", "rac")
FAMILIES = (
    "exact-k-parity", "l-parity", "noisy-parity", "random-function",
    "disjoint-pair", "unique-intersect-pair", "rac-message",
)
DEFAULT_FAMILY = {
    "test": "exact-k-parity",
    "infl": "exact-k-parity",
    "partition-check": "exact-k-parity",
    "comm": "disjoint-pair",
    "reduce": "disjoint-pair",
    "rac": "rac-message",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "test"
    family: str | None = None
    n: int = 1 << 14
    k: int = 8
    ks: tuple[int, ...] = ()
    ell: int | None = None
    set_size: int | None = None
    trials: int = 100
    seed: int = 0
    noise_rate: float = 0.0
    intersect: bool = True
    c_q: int = 1000
    rho: Fraction = Fraction(1, 10)
    threshold: Fraction = Fraction(3, 4)
    reduced_n_factor: int = 100
    reps: int = 40
    t_blr: int = blr_rounds()
    small_k_threshold: int = 4
    buckets: int | None = None
    bucketing: str = "slice"
    n_per_k2: int | None = None
    workers: int = 1

    def __post_init__(self):
        if self.family is None:
            object.__setattr__(self, "family", DEFAULT_FAMILY.get(self.scenario))
        object.__setattr__(self, "ks", tuple(self.ks))
        self.validate()

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n < 1 or not 0 <= self.k <= self.n:
            raise ConfigError(f"need n >= 1 and 0 <= k <= n, got n={self.n}, k={self.k}")
        if not 0 <= self.noise_rate < 0.5:
            raise ConfigError("noise rate must lie in [0, 1/2)")
        if self.reps < 1 or self.c_q < 1 or self.t_blr < 1 or self.workers < 1:
            raise ConfigError("reps, c_q, t_blr and workers must be positive")
        try:
            self.tester_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.scenario == "reduce" and self.k % 2:
            raise ConfigError("the reduction needs an even k (sets of size k/2)")
        if self.bucketing not in ("slice", "hash"):
            raise ConfigError(f"unknown bucketing {self.bucketing!r}")

    def tester_params(self) -> TesterParams:
        return TesterParams(
            rho=self.rho, c_q=self.c_q, reduced_n_factor=self.reduced_n_factor,
            threshold=self.threshold, t_blr=self.t_blr,
            decode=DecodeParams(self.reps), small_k_threshold=self.small_k_threshold,
        )

    def to_json(self) -> dict:
        out = asdict(self)
        out["rho"] = str(self.rho)
        out["threshold"] = str(self.threshold)
        out["ks"] = list(self.ks)
        out.pop("workers")
        return out


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


@dataclass
class TrialResult:
    success: bool
    accept: bool
    cost: int
    extra: dict = field(default_factory=dict)


def _pair(n: int, k: int, intersect: bool, rng) -> KSetInstance:
    pool = rng.choice(n, size=2 * k, replace=False)
    x, y = list(pool[:k]), list(pool[k:])
    if intersect:
        y[0] = x[int(rng.integers(k))]
    return KSetInstance(n, x, y, promise="unique")


def _trial_test(cfg: ExperimentConfig, rng) -> TrialResult:
    n, k = cfg.n, cfg.k
    if cfg.family in ("exact-k-parity", "noisy-parity"):
        J = sample_support(n, k, rng)
        spec = ParitySpec(n, J)
        if cfg.family == "noisy-parity":
            f = make_noisy_parity(spec, cfg.noise_rate, int(rng.integers(2**63)))
        else:
            f = ParityOracle(spec)
        expect = True
    elif cfg.family == "l-parity":
        ell = k - 1 if cfg.ell is None else cfg.ell
        if ell == k or not 0 <= ell <= n:
            raise ConfigError("l-parity family needs 0 <= ell <= n with ell != k")
        J = sample_support(n, ell, rng)
        f, expect = ParityOracle(ParitySpec(n, J)), False
    elif cfg.family == "random-function":
        f, J, expect = random_function(n, rng), None, False
    else:
        raise ConfigError(f"family {cfg.family!r} does not apply to the tester")
    verdict = test_k_parity(f, k, cfg.tester_params(), rng)
    if f.ledger.count != verdict.queries_used:
        raise RuntimeError("oracle was consulted outside the counted query path")
    extra = {}
    if J is not None and verdict.accept:
        extra["identified"] = verdict.identifies(J)
    return TrialResult(verdict.accept == expect, verdict.accept, verdict.queries_used, extra)


def _trial_infl(cfg: ExperimentConfig, rng) -> TrialResult:
    n, k = cfg.n, cfg.k
    if k < 1 or k >= n:
        raise ConfigError("influence scenario needs 1 <= k < n")
    J = sample_support(n, k, rng)
    rest = np.setdiff1d(np.arange(n), sorted(J))
    x = set(int(i) for i in rng.choice(rest, size=min(len(rest), max(1, len(rest) // 2)), replace=False))
    if cfg.intersect:
        x.add(int(sorted(J)[int(rng.integers(k))]))
    point = Point.from_indices(n, x)
    spec = ParitySpec(n, J)
    if cfg.family == "noisy-parity":
        f = make_noisy_parity(spec, cfg.noise_rate, int(rng.integers(2**63)))
        out = noisy_influence_test(f, point, rng, DecodeParams(cfg.reps))
    elif cfg.family == "exact-k-parity":
        f = ParityOracle(spec)
        out = influence_test(f, point, rng)
    else:
        raise ConfigError(f"family {cfg.family!r} does not apply to the influence test")
    return TrialResult(out == int(cfg.intersect), bool(out), f.ledger.count)


def _trial_partition(cfg: ExperimentConfig, rng) -> TrialResult:
    k = cfg.k
    size = k if cfg.set_size is None else cfg.set_size
    ell = cfg.reduced_n_factor * k * k
    if size > cfg.n:
        raise ConfigError("set size exceeds n")
    J = rng.choice(cfg.n, size=size, replace=False)
    if cfg.n <= 1 << 20:
        classes = random_partition(cfg.n, ell, rng).class_of[J]
    else:
        classes = rng.integers(0, ell, size=size)
    _, counts = np.unique(classes, return_counts=True)
    N = int(np.count_nonzero(counts & 1))
    ok = N == size if size <= k else N > k
    return TrialResult(ok, ok, 0, {"N": N})


def _trial_comm(cfg: ExperimentConfig, rng) -> TrialResult:
    if cfg.family not in ("disjoint-pair", "unique-intersect-pair"):
        raise ConfigError(f"family {cfg.family!r} does not apply to protocols")
    intersect = cfg.family == "unique-intersect-pair"
    seed = int(rng.integers(2**63))
    if cfg.scenario == "comm":
        inst = _pair(cfg.n, cfg.k, intersect, rng)
        outcome, transcript = disjointness_protocol(inst, seed, cfg.buckets, cfg.bucketing)
    else:
        inst = _pair(cfg.n, cfg.k // 2, intersect, rng)
        outcome, transcript = tester_to_protocol(inst, kparity_tester_factory(cfg.tester_params()), seed)
    correct = (outcome is Outcome.INTERSECTING) == intersect
    return TrialResult(correct, outcome is Outcome.DISJOINT, transcript.count)


def _trial_rac(cfg: ExperimentConfig, rng) -> TrialResult:
    k = cfg.k
    M = [int(m) for m in rng.integers(0, 2 * k, size=k)]
    i, ell = int(rng.integers(k)), int(rng.integers(rac_bits(k)))
    inst = KSetInstance(cfg.n, rac_encode(M, cfg.n), rac_probe(i, ell, cfg.n, k), promise="unique")
    outcome, transcript = disjointness_protocol(inst, int(rng.integers(2**63)), cfg.buckets, cfg.bucketing)
    bit = int(outcome is Outcome.INTERSECTING)
    return TrialResult(bit == (M[i] >> ell) & 1, bool(bit), transcript.count)


_RUNNERS = {
    "test": _trial_test,
    "infl": _trial_infl,
    "partition-check": _trial_partition,
    "comm": _trial_comm,
    "reduce": _trial_comm,
    "rac": _trial_rac,
}


def run_one(cfg: ExperimentConfig, index: int) -> TrialResult:
    return _RUNNERS[cfg.scenario](cfg, trial_rng(cfg.seed, index))


def _run_indexed(args) -> TrialResult:
    return run_one(*args)


def run_trials(cfg: ExperimentConfig) -> TrialStats:
    """Run ``cfg.trials`` independent trials and aggregate them."""
    start = time.perf_counter()
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_indexed, jobs, chunksize=max(1, cfg.trials // (4 * cfg.workers))))
    else:
        results = [_run_indexed(j) for j in jobs]
    stats = TrialStats.from_outcomes(
        successes=sum(r.success for r in results),
        trials=len(results),
        costs=[r.cost for r in results],
        accepts=sum(r.accept for r in results),
        wall_time=time.perf_counter() - start,
    )
    identified = [r.extra["identified"] for r in results if "identified" in r.extra]
    if cfg.scenario == "test":
        stats.identified = (sum(identified), len(identified))
    return stats


@dataclass
class SweepResult:
    rows: list[dict]
    fitted_c: float
    ratio_spread: float

    def to_json(self) -> dict:
        return {"rows": self.rows, "fitted_c": self.fitted_c, "ratio_spread": self.ratio_spread}


def fit_klogk(ks, costs) -> tuple[float, list[float]]:
    """Least-squares ``c`` in ``cost ≈ c k log2 k`` and the per-k ratios ``cost / (k log2 k)``."""
    xs = np.array([k * math.log2(k) for k in ks], dtype=float)
    ys = np.array(costs, dtype=float)
    if np.any(xs <= 0):
        raise ConfigError("k log2 k must be positive (k >= 2)")
    c = float(xs @ ys / (xs @ xs))
    return c, (ys / xs).tolist()


def sweep_scaling(cfg: ExperimentConfig) -> SweepResult:
    """Mean query (or bit) cost at every ``k`` in ``cfg.ks``."""
    ks = sorted(set(cfg.ks))
    if len(ks) < 3:
        raise ConfigError("a sweep needs at least three distinct values of k")
    rows, costs = [], []
    for k in ks:
        n = cfg.n if cfg.n_per_k2 is None else cfg.n_per_k2 * k * k
        stats = run_trials(replace(cfg, k=k, n=n))
        costs.append(stats.mean_cost)
        rows.append({"k": k, "n": n, "mean_cost": stats.mean_cost, "max_cost": stats.max_cost,
                     "success_rate": stats.estimate})
    c, ratios = fit_klogk(ks, costs)
    for row, r in zip(rows, ratios):
        row["cost_per_klogk"] = r
    return SweepResult(rows, c, max(ratios) / min(ratios))
