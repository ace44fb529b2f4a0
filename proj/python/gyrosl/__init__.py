"""Semi-Lagrangian drift-kinetic Vlasov solver (Python bindings)."""

from ._core import (
    ConfigError,
    Error,
    IoError,
    RunConfig,
    Simulation,
    load_config,
    parse_config,
    precompute_feet,
    read_diagnostics,
    run,
)

__all__ = [
    "ConfigError",
    "Error",
    "IoError",
    "RunConfig",
    "Simulation",
    "load_config",
    "parse_config",
    "precompute_feet",
    "read_diagnostics",
    "run",
]
