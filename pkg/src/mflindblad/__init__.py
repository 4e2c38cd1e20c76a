"""Mean-field Lindblad dynamics via interacting quantum trajectories."""
from .generators import ModelSpec, NumericalError, PhysicalityError, solve_meanfield_reference, solve_nbody_reference
from .meanfield import InteractionKernel, apply_kernel, qubit_example_kernel, validate_kernel
from .operators import PureState
from .trajectories import SchemeConfig, simulate, simulate_mckean_iid

__version__ = "0.1.0"

__all__ = [
    "InteractionKernel",
    "ModelSpec",
    "NumericalError",
    "PhysicalityError",
    "PureState",
    "SchemeConfig",
    "apply_kernel",
    "qubit_example_kernel",
    "simulate",
    "simulate_mckean_iid",
    "solve_meanfield_reference",
    "solve_nbody_reference",
    "validate_kernel",
]
