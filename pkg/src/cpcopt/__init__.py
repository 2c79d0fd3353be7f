"""Time-optimal quadrotor trajectory optimization through ordered waypoints.

The planner discretizes the free-time optimal control problem with
multiple shooting, couples waypoint completion to proximity through
complementary progress constraints, and solves the resulting NLP with a
primal-dual interior-point method.  An independent verifier re-integrates
every solution before it is reported feasible.
"""

from .quad_model import (
    NAMED_CONFIGS,
    QuadConfig,
    QuadState,
    ReducedInput,
    RotorInput,
    named_config,
)
from .progress import EndConditions, Track
from .nlp_assembly import BuildOptions, CpcProblem, build
from .solver import SolverOptions, SolveReport, solve, solve_homotopy
from .solution import Solution

__all__ = [
    "NAMED_CONFIGS",
    "QuadConfig",
    "QuadState",
    "RotorInput",
    "ReducedInput",
    "named_config",
    "Track",
    "EndConditions",
    "BuildOptions",
    "CpcProblem",
    "build",
    "SolverOptions",
    "SolveReport",
    "solve",
    "solve_homotopy",
    "Solution",
]

__version__ = "0.1.0"
