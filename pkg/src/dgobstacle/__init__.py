"""Adaptive discontinuous Galerkin solver for the two-dimensional obstacle problem."""
from .assembly import MethodConfig
from .driver import adaptive_solve, solve_once, write_outputs
from .mesh import Mesh, build_rect_mesh, refine_nvb, topology
from .problems import ProblemSpec, builtin_example

__version__ = "0.1.0"

__all__ = [
    "MethodConfig", "Mesh", "ProblemSpec", "adaptive_solve", "build_rect_mesh",
    "builtin_example", "refine_nvb", "solve_once", "topology", "write_outputs",
]
