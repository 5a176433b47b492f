"""ALE finite-element solver for the Oseen equations on moving domains with projection-based VMS."""
from .errors import (
    ConditionViolated,
    ConfigError,
    IndexOutOfRange,
    InvertedCell,
    NegativeViscosity,
    OseenAleError,
    SolverFailure,
    WrongVariant,
)
from .mesh_motion import (
    MOTIONS,
    STANDARD_MOTIONS,
    DiscreteAleMap,
    ReferenceMesh,
    build_discrete_map,
    make_motion,
    mapping_norms,
    mesh_velocity,
    uniform_grid,
    unit_square,
)
from .timestepper import SchemeConfig, Trajectory, run_simulation, step_endpoint, step_gcl

__version__ = "0.1.0"

__all__ = [
    "ConditionViolated", "ConfigError", "IndexOutOfRange", "InvertedCell", "NegativeViscosity",
    "OseenAleError", "SolverFailure", "WrongVariant",
    "MOTIONS", "STANDARD_MOTIONS", "DiscreteAleMap", "ReferenceMesh", "build_discrete_map",
    "make_motion", "mapping_norms", "mesh_velocity", "uniform_grid", "unit_square",
    "SchemeConfig", "Trajectory", "run_simulation", "step_endpoint", "step_gcl",
]
