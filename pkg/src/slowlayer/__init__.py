"""Metastable transition layers in 1D viscous conservation laws.

Modules: ``constitutive`` (pressure/viscosity laws, admissible jumps),
``burgers`` (closed-form viscous Burgers layer), ``manifold`` (near-steady
layer profiles parameterized by position), ``spectral`` (adjoint eigenproblem),
``reduced`` (scalar ODE for the layer position), ``pde`` (finite-volume
solver) and ``cli`` (experiment runner).
"""
from .constitutive import FluidModel, ShockData
from .burgers import BurgersSetup
from .manifold import DomainSpec
from .errors import (ConfigError, DomainError, PositivityError, ResolutionError, SlowLayerError,
                     TrackingError)

__version__ = "0.1.0"

__all__ = ["FluidModel", "ShockData", "BurgersSetup", "DomainSpec", "ConfigError", "DomainError",
           "PositivityError", "ResolutionError", "SlowLayerError", "TrackingError"]
