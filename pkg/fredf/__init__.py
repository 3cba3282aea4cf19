"""Frequency-domain forecasting with learned per-frequency transfer
functions and dynamic fusion.

This module re-exports the main entry points of the package.
"""

from .config import ModelConfig, TrainConfig
from .model import ParameterSet, forward, init_parameters
from .training import train

__version__ = "0.1.0"
__all__ = [
    "ModelConfig",
    "ParameterSet",
    "TrainConfig",
    "forward",
    "init_parameters",
    "train",
]
