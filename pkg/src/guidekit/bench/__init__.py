"""Benchmark environments, the experiment runner and reporting."""

from .catalog import EnvironmentSpec, catalog, environment_names, get_environment, random_simple_passage
from .runner import ExperimentConfig, RunSummary, run_experiment

__all__ = ["EnvironmentSpec", "ExperimentConfig", "RunSummary", "catalog", "environment_names",
           "get_environment", "random_simple_passage", "run_experiment"]
