"""Closed-loop simulation engine, experiment configs and artifacts."""

from kfopc.harness.artifacts import emit_artifacts
from kfopc.harness.config import ConfigError, ControllerConfig, ExperimentConfig, load_config, save_config
from kfopc.harness.engine import RunArtifacts, run_closed_loop
from kfopc.harness.experiments import (
    experiment_broadband,
    experiment_real_path,
    experiment_tonal_saturation,
    shipped_config,
)

__all__ = [
    "ConfigError",
    "ControllerConfig",
    "ExperimentConfig",
    "RunArtifacts",
    "emit_artifacts",
    "experiment_broadband",
    "experiment_real_path",
    "experiment_tonal_saturation",
    "load_config",
    "run_closed_loop",
    "save_config",
    "shipped_config",
]
