"""PDHG + crossover LP toolkit with a corner-push phase."""
from .corner_push import (CornerPushConfig, CornerPushModel, CornerPushResult,
                          build_corner_model, run_corner_push)
from .crossover import (CrossoverConfig, CrossoverResult, CrossoverStatus, PushEstimate,
                        estimate_pushes, run_crossover)
from .estimators import Crossover, CornerPush, LPSolver, PDHGSolver
from .instance_gen import GenSpec, generate, generate_instance, is_corner_push_candidate
from .lp_model import (EQ, GE, LE, Iterate, LinearProgram, ResidualReport, Tolerances,
                       converged, off_bound_count, residuals)
from .mps_io import read_json, read_mps, write_json, write_mps
from .pdhg import FullKKT, PdhgConfig, PdhgResult, PrimalResidualOnly, Status, solve_pdhg

__version__ = "0.1.0"

__all__ = [
    "EQ", "GE", "LE", "CornerPush", "CornerPushConfig", "CornerPushModel", "CornerPushResult",
    "Crossover", "CrossoverConfig", "CrossoverResult", "CrossoverStatus", "FullKKT", "GenSpec",
    "Iterate", "LPSolver", "LinearProgram", "PDHGSolver", "PdhgConfig", "PdhgResult",
    "PrimalResidualOnly", "PushEstimate", "ResidualReport", "Status", "Tolerances",
    "build_corner_model", "converged", "estimate_pushes", "generate", "generate_instance",
    "is_corner_push_candidate", "off_bound_count", "read_json", "read_mps", "residuals",
    "run_corner_push", "run_crossover", "solve_pdhg", "write_json", "write_mps",
]
