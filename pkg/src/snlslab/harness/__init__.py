"""Config-driven experiment runner and command-line entry point."""

from .config import ExperimentConfig
from .runner import RunManifest, emit_results, run

__all__ = ["ExperimentConfig", "RunManifest", "emit_results", "run"]
