"""Finite element laboratory for the wave equation with dynamic boundary conditions."""

__version__ = "0.1.0"

from .assembly import DiscreteOperators, assemble, h0_norm, h1_norm, weighted_lp_norm
from .energy import EnergySample, energy, energy_identity_residual, potential_J, upsilon
from .mesh import Mesh, generate_annulus, generate_interval, generate_rectangle
from .nonlin import CoefficientField, PowerSum, ProblemSpec
from .regime import RegimeReport, classify
from .stepper import State, Stepper, StepperConfig, Trajectory, integrate

__all__ = [
    "CoefficientField",
    "DiscreteOperators",
    "EnergySample",
    "Mesh",
    "PowerSum",
    "ProblemSpec",
    "RegimeReport",
    "State",
    "Stepper",
    "StepperConfig",
    "Trajectory",
    "assemble",
    "classify",
    "energy",
    "energy_identity_residual",
    "generate_annulus",
    "generate_interval",
    "generate_rectangle",
    "h0_norm",
    "h1_norm",
    "integrate",
    "potential_J",
    "upsilon",
    "weighted_lp_norm",
]
