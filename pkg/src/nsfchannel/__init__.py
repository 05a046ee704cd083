"""Steady compressible Navier-Stokes-Fourier flow in a channel.

The package builds a near-constant background state, lifts the
inhomogeneous normal boundary datum, and drives a successive
approximation for the perturbation system to a fixed point, while a
diagnostics layer measures every inequality the construction leans on.
"""

from .background import Background, build_background
from .config import ConfigError, RunConfig, build_problem_data, load_config
from .constitutive import FlowParams, GasModel
from .data import ProblemData, data_size
from .grid import Channel, Grid
from .picard import (DivergenceError, FlowState, IterationReport,
                     StagnationError, picard_iterate, reconstruct_physical)

__all__ = [
    "Background",
    "Channel",
    "ConfigError",
    "DivergenceError",
    "FlowParams",
    "FlowState",
    "GasModel",
    "Grid",
    "IterationReport",
    "ProblemData",
    "RunConfig",
    "StagnationError",
    "build_background",
    "build_problem_data",
    "data_size",
    "load_config",
    "picard_iterate",
    "reconstruct_physical",
]

__version__ = "0.1.0"
