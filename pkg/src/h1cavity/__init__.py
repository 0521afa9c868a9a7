"""Design, FDTD simulation and entanglement analysis of H1 photonic-crystal cavities."""

from h1cavity.errors import (
    ConfigurationError,
    H1CavityError,
    NumericalError,
    ProbeNodeError,
)

__version__ = "0.1.0"

#: bumped whenever a change alters simulation output; part of every cache key
ENGINE_VERSION = "2"

__all__ = [
    "ConfigurationError",
    "H1CavityError",
    "NumericalError",
    "ProbeNodeError",
    "ENGINE_VERSION",
    "__version__",
]
