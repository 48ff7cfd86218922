"""Reduced dynamics of the driven emitter coupled to phonon baths."""

from .influence import influence_coefficients, influence_factors, pair_factor, self_factor
from .liouville import liouvillian, unvec, vec
from .process_tensor import (
    CAP_VECTOR,
    CONSTRUCTIONS,
    BondDimensionError,
    ProcessTensor,
    build_process_tensor,
    UniformProcessTensor,
    build_process_tensor_from_eta,
    build_uniform_process_tensor_from_eta,
)
from .solvers import (
    BRUTE_FORCE_MAX_STEPS,
    SOLVER_KINDS,
    InvariantViolation,
    PopulationRangeError,
    SolverConfig,
    Trajectory,
    final_population,
    ground_state,
    propagate,
    propagate_brute_force,
    propagate_closed,
    time_grid,
    validate_state,
)

__all__ = [
    "BRUTE_FORCE_MAX_STEPS",
    "CAP_VECTOR",
    "CONSTRUCTIONS",
    "SOLVER_KINDS",
    "BondDimensionError",
    "InvariantViolation",
    "PopulationRangeError",
    "ProcessTensor",
    "SolverConfig",
    "Trajectory",
    "UniformProcessTensor",
    "build_process_tensor",
    "build_process_tensor_from_eta",
    "build_uniform_process_tensor_from_eta",
    "final_population",
    "ground_state",
    "influence_coefficients",
    "influence_factors",
    "liouvillian",
    "pair_factor",
    "propagate",
    "propagate_brute_force",
    "propagate_closed",
    "self_factor",
    "time_grid",
    "unvec",
    "validate_state",
    "vec",
]
