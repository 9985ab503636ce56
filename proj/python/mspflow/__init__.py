"""Fine-scale and multiscale mixed IMPES two-phase flow solvers."""

from ._core import (
    ConfigError,
    IngestionError,
    RunConfig,
    SolverError,
    compare,
    permeability,
    run_fine,
    run_ms,
)

__all__ = [
    "ConfigError",
    "IngestionError",
    "RunConfig",
    "SolverError",
    "compare",
    "permeability",
    "run_fine",
    "run_ms",
]
