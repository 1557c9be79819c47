"""Numerical laboratory for a third-order dispersive flow of loops into space forms."""

from .discretization import LoopGrid, MapState, Scheme, TangentField, ambient_deriv, cov_deriv, cov_stack, velocity
from .flow import FlowConfig, Trajectory, cfl_dt, diff_w12, integrate, rhs_flow, rhs_regularized, step_ifrk4, step_rk4
from .functionals import (
    EnergyReport,
    dE3_dt_formula,
    energy_E1,
    energy_E2,
    energy_E3,
    energy_report,
    gn_diagnostic,
    ricci_sobolev_I,
    sobolev_H,
)
from .space_forms import DegenerateStateError, GeometryError, Kind, SpaceForm

__version__ = "0.1.0"

__all__ = [
    "ambient_deriv",
    "cfl_dt",
    "cov_deriv",
    "cov_stack",
    "dE3_dt_formula",
    "DegenerateStateError",
    "diff_w12",
    "energy_E1",
    "energy_E2",
    "energy_E3",
    "energy_report",
    "EnergyReport",
    "FlowConfig",
    "GeometryError",
    "gn_diagnostic",
    "integrate",
    "Kind",
    "LoopGrid",
    "MapState",
    "rhs_flow",
    "rhs_regularized",
    "ricci_sobolev_I",
    "Scheme",
    "sobolev_H",
    "SpaceForm",
    "step_ifrk4",
    "step_rk4",
    "TangentField",
    "Trajectory",
    "velocity",
]
