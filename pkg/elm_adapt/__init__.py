"""
elm-adapt - Adaptive Eulerian-Lagrangian finite elements for convection-diffusion
"""

from .__version__ import __version__, get_version, get_version_info
from .adaptivity import Trajectory, run_algorithm1, run_algorithm2, run_uniform
from .benchmarks import BENCHMARKS, BenchmarkProblem, convergence_study, make_benchmark
from .config import RunConfig, Tolerances, load_config, parse_config
from .errors import ElmError
from .mesh import Mesh, box_mesh, coarsen, interval_mesh, rectangle_mesh, refine

__all__ = [
    "__version__",
    "get_version",
    "get_version_info",
    "Trajectory",
    "run_algorithm1",
    "run_algorithm2",
    "run_uniform",
    "BENCHMARKS",
    "BenchmarkProblem",
    "convergence_study",
    "make_benchmark",
    "RunConfig",
    "Tolerances",
    "load_config",
    "parse_config",
    "ElmError",
    "Mesh",
    "box_mesh",
    "coarsen",
    "interval_mesh",
    "rectangle_mesh",
    "refine",
]
