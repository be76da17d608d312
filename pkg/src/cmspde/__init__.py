"""Centre-manifold models of a stochastically forced Burgers-type SPDE."""
from ._accel import default_backend
from .stochastic_core import (InvalidParameterError, NumericalBlowupError, SdeState,
                              WienerIncrements, generate_increments, heun_step)

__version__ = "0.1.0"

__all__ = [
    "InvalidParameterError",
    "NumericalBlowupError",
    "SdeState",
    "WienerIncrements",
    "default_backend",
    "generate_increments",
    "heun_step",
]
