"""Robustness of MinD/MinE pole-to-pole oscillations to extrinsic rate noise.

A 1D five-species reaction-diffusion model integrated with RK4, linear
stability and sensitivity analysis around its fixed point, Ornstein-Uhlenbeck
and correlated Gaussian perturbations of the rate constants, and the
frequency-shift measurements that compare the two.
"""
from .errors import (
    ConfigError,
    ConvergenceError,
    MinNoiseError,
    NegativeConcentrationWarning,
    NoOscillationError,
    NonphysicalRootError,
    NumericDomainError,
)
from .model import FieldState, ModelParams, conserved_totals, diffusion_rhs, preset, reaction_rhs

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "FieldState",
    "MinNoiseError",
    "ModelParams",
    "NegativeConcentrationWarning",
    "NoOscillationError",
    "NonphysicalRootError",
    "NumericDomainError",
    "conserved_totals",
    "diffusion_rhs",
    "preset",
    "reaction_rhs",
]
