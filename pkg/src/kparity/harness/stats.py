from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from statsmodels.stats.proportion import proportion_confint


def wilson_interval(successes: int, trials: int, alpha: float = 0.05) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("need at least one trial")
    lo, hi = proportion_confint(successes, trials, alpha=alpha, method="wilson")
    return float(lo), float(hi)


def binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(p * (1 - p) / trials)


@dataclass
class TrialStats:
    successes: int
    trials: int
    estimate: float
    interval: tuple[float, float]
    mean_cost: float
    max_cost: int
    accepts: int = 0
    identified: tuple[int, int] | None = None
    wall_time: float = 0.0

    @classmethod
    def from_outcomes(cls, successes: int, trials: int, costs, accepts: int = 0,
                      wall_time: float = 0.0) -> TrialStats:
        costs = list(costs)
        return cls(
            successes=successes,
            trials=trials,
            estimate=successes / trials,
            interval=wilson_interval(successes, trials),
            mean_cost=sum(costs) / len(costs) if costs else 0.0,
            max_cost=max(costs) if costs else 0,
            accepts=accepts,
            wall_time=wall_time,
        )

    def to_json(self, timing: bool = False) -> dict:
        out = asdict(self)
        out["interval"] = list(self.interval)
        if self.identified is None:
            out.pop("identified")
        else:
            out["identified"] = list(self.identified)
        if not timing:
            out.pop("wall_time")
        return out
