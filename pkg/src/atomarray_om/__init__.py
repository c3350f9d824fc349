"""Cavity optomechanics with atom-array membranes."""

__version__ = "0.1.0"

from . import dynamics, fock, lattice, params, trajectories  # noqa: E402
from .fock import HilbertDims, ModelParams, fig4_model  # noqa: E402
from .params import PhysicalConfig, derive_params  # noqa: E402

__all__ = [
    "__version__",
    "dynamics",
    "fock",
    "lattice",
    "params",
    "trajectories",
    "HilbertDims",
    "ModelParams",
    "fig4_model",
    "PhysicalConfig",
    "derive_params",
]
