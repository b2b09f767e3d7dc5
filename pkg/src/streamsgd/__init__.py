"""Deterministic simulator of synchronous distributed SGD over streaming data."""

from .config import SimConfig, load_config, parse_config, render_config, save_config
from .engine import RunResult, RunSummary, Simulation, run_experiment

__all__ = [
    "SimConfig",
    "Simulation",
    "RunResult",
    "RunSummary",
    "run_experiment",
    "load_config",
    "parse_config",
    "render_config",
    "save_config",
]
