"""Particle Vlasov-Poisson solver in the -|x|^2/2 trap."""

from pathlib import Path

from ._vptrap import (
    ConfigError,
    NumericalError,
    SimConfig,
    initial_mass,
    linear_flow,
    parse_config,
    read_snapshot,
    run,
    sample_initial,
    serialize_config,
    solve_free_space,
    to_hyperbolic,
)


def load_config(path):
    return parse_config(Path(path).read_text())


def load_snapshot(path):
    return read_snapshot(Path(path).read_bytes())


__all__ = [
    "ConfigError",
    "NumericalError",
    "SimConfig",
    "initial_mass",
    "linear_flow",
    "load_config",
    "load_snapshot",
    "parse_config",
    "read_snapshot",
    "run",
    "sample_initial",
    "serialize_config",
    "solve_free_space",
    "to_hyperbolic",
]
