"""Closed-loop simulation, metrics, benchmarking and dataset generation."""

from .bench import BenchConfig, aggregate, run_benchmark, run_trials, summary_csv, trial_specs, trials_csv
from .dataset import dataset_from_bytes, dataset_to_bytes, generate_dataset
from .metrics import Metrics, compute_metrics
from .simulate import METHODS, TIERS, StepRecord, TrialConfig, TrialLog, simulate_trial

__all__ = [
    "BenchConfig", "METHODS", "Metrics", "StepRecord", "TIERS", "TrialConfig", "TrialLog", "aggregate",
    "compute_metrics", "dataset_from_bytes", "dataset_to_bytes", "generate_dataset", "run_benchmark",
    "run_trials", "simulate_trial", "summary_csv", "trial_specs", "trials_csv",
]
