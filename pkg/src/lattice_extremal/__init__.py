"""Extremal functions for discrete Sobolev and Hardy-Littlewood-Sobolev inequalities on Z^N."""
from .lattice_core import (
    HLSParams,
    LatticeBox,
    LatticeError,
    LatticeFunction,
    SobolevParams,
    d1p_energy,
    d1p_norm,
    delta,
    lp_norm,
    make_box,
    read_grid,
    write_grid,
)
from .hls import HLSOptions, estimate_K, power_iterate
from .sobolev import ConvergenceWarning, SolverOptions, el_residual, estimate_S, minimize_on_box, verify_sobolev

__all__ = [
    "ConvergenceWarning",
    "HLSOptions",
    "HLSParams",
    "LatticeBox",
    "LatticeError",
    "LatticeFunction",
    "SobolevParams",
    "SolverOptions",
    "d1p_energy",
    "d1p_norm",
    "delta",
    "el_residual",
    "estimate_K",
    "estimate_S",
    "lp_norm",
    "make_box",
    "minimize_on_box",
    "power_iterate",
    "read_grid",
    "verify_sobolev",
    "write_grid",
]
