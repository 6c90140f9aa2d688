"""Spin market simulator: lattice microdynamics, frozen-field volatility
experiments, a macroscopic Langevin price model, and time-series analytics."""

__version__ = "0.1.0"

from .lattice import (
    InitState,
    ModelParams,
    SpinLattice,
    T_CRITICAL,
    flip_up_probability,
    run_series,
    step,
)
from .series import SeriesRecord

__all__ = [
    "InitState",
    "ModelParams",
    "SpinLattice",
    "SeriesRecord",
    "T_CRITICAL",
    "flip_up_probability",
    "run_series",
    "step",
    "__version__",
]
