from .experiments import ConfigError, ExperimentConfig, SweepResult, run_trials, sweep_scaling
from .stats import TrialStats, wilson_interval

__all__ = ["ConfigError", "ExperimentConfig", "SweepResult", "TrialStats", "run_trials",
           "sweep_scaling", "wilson_interval"]
