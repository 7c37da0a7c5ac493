"""Benchmark harness: synthetic data, CSV input, experiment runner and CLI."""

from .config import ArmSpec, ConfigError, ExperimentConfig, config_from_dict, load_config
from .datasets import (
    NonBinaryLabel,
    ParseError,
    generate_gaussian_mean_data,
    generate_gaussian_precision_data,
    generate_logistic_data,
    load_csv_dataset,
)
from .runner import ResultBundle, derive_seed, emit_mse_curve, emit_mse_matrix, run_experiment

__all__ = [
    "ArmSpec",
    "ConfigError",
    "ExperimentConfig",
    "NonBinaryLabel",
    "ParseError",
    "ResultBundle",
    "config_from_dict",
    "derive_seed",
    "emit_mse_curve",
    "emit_mse_matrix",
    "generate_gaussian_mean_data",
    "generate_gaussian_precision_data",
    "generate_logistic_data",
    "load_config",
    "load_csv_dataset",
    "run_experiment",
]
