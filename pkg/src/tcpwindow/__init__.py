"""Simulation and verification toolkit for the TCP window-size AIMD process."""
from .laws import Dirac, DiscreteMixture, MultiplicativeLaw, Uniform01, kappa1
from .pdmp import Constant, Linear, PathSample, ProcessSpec, Shifted

__version__ = "0.1.0"

__all__ = [
    "Constant",
    "Dirac",
    "DiscreteMixture",
    "Linear",
    "MultiplicativeLaw",
    "PathSample",
    "ProcessSpec",
    "Shifted",
    "Uniform01",
    "kappa1",
]
