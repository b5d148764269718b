"""Experiment harness: configuration, signals, orchestration, artifacts and CLI."""

from .config import ExperimentConfig, bundled_config_path, load_config, parse_config
from .experiment import (ExperimentResult, design, run_baseline, run_experiment,
                         sample_measurements, validate_design)
from .signals import LearningSignal

__all__ = [
    "ExperimentConfig", "ExperimentResult", "LearningSignal", "bundled_config_path", "design",
    "load_config", "parse_config", "run_baseline", "run_experiment", "sample_measurements",
    "validate_design",
]
