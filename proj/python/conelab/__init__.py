"""Tangent-cone regularity checks and elliptic solves on semialgebraic domains."""

from ._conelab import (
    Config,
    IoError,
    NumericalError,
    ValidationError,
    check_cone,
    commands,
    estimate_p,
    run_command,
    slice_poincare,
    solve_fem,
    wos_estimate,
)

__all__ = [
    "Config",
    "IoError",
    "NumericalError",
    "ValidationError",
    "check_cone",
    "commands",
    "estimate_p",
    "run_command",
    "slice_poincare",
    "solve_fem",
    "wos_estimate",
]
