"""Numerical laboratory for controlled CTRWs, their scaled DP value
recursions, and the limiting fractional HJB equations."""

from . import (
    cli,
    convergence_lab,
    ctrw_sim,
    dp_solver,
    errors,
    fhjb_solver,
    frac_calc,
    stable_rng,
)

__all__ = [
    "cli",
    "convergence_lab",
    "ctrw_sim",
    "dp_solver",
    "errors",
    "fhjb_solver",
    "frac_calc",
    "stable_rng",
]

__version__ = "0.1.0"
