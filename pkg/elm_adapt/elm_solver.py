#!/usr/bin/env python3
"""
ELM solver - One Eulerian-Lagrangian time step

Traces the mesh vertices back along the characteristics, transports the
previous solution to the feet, and solves the symmetric backward-Euler
system (M/k + A) U = M (U~/k + f_h) with Dirichlet elimination.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .characteristics import TraceResult, VelocityField, trace_feet
from .errors import NonPositiveEpsilon
from .fem import FeFunction, assemble_mass, assemble_stiffness, dirichlet_solve, eval_at_points
from .mesh import Mesh

logger = logging.getLogger(__name__)

SpaceTimeFunction = Callable[[np.ndarray, float], np.ndarray]


@dataclass
class StepInput:
    """Everything one time step needs."""
    mesh: Mesh
    u_prev: FeFunction
    field: VelocityField
    f: Optional[SpaceTimeFunction]
    t_n: float
    k_n: float
    epsilon: float
    boundary: Optional[SpaceTimeFunction] = None
    t_start: Optional[float] = None
    cg_rtol: float = 1e-12

    def __post_init__(self):
        if not self.k_n > 0:
            raise ValueError(f"time step must be positive, got {self.k_n!r}")
        if not self.epsilon > 0:
            raise NonPositiveEpsilon(self.epsilon)


@dataclass
class StepOutput:
    """Solution of one step together with what the estimators need."""
    u_new: FeFunction
    u_transported: FeFunction
    trace: TraceResult
    linear_residual: float
    f_h: FeFunction
    iterations: int
    dirichlet: np.ndarray
    t_n: float
    k_n: float
    epsilon: float

    @property
    def mesh(self) -> Mesh:
        return self.u_new.mesh


def _values(func: Optional[SpaceTimeFunction], points: np.ndarray, t: float) -> np.ndarray:
    if func is None or len(points) == 0:
        return np.zeros(len(points))
    values = np.asarray(func(points, t), dtype=float).reshape(-1)
    return np.broadcast_to(values, (len(points),)).copy()


def transport_interpolate(u_prev: FeFunction, mesh_new: Mesh, trace: TraceResult) -> FeFunction:
    """Nodal interpolant on mesh_new of u_prev evaluated at the traced feet."""
    if len(trace.feet) != mesh_new.num_vertices:
        raise ValueError(f"need one foot per vertex: {len(trace.feet)} feet for "
                         f"{mesh_new.num_vertices} vertices")
    return FeFunction(mesh_new, eval_at_points(u_prev, trace.feet))


def elm_step(step: StepInput) -> StepOutput:
    """
    Advance one ELM step to t_n.

    u_prev is evaluated on its own mesh at the feet, so a mesh change
    within the step needs no separate transfer. The transported function
    takes the Dirichlet data on the boundary.

    Raises:
        NoConvergence: characteristic tracing failed
        SolverDiverged: CG failed to converge
    """
    mesh = step.mesh
    dirichlet = mesh.boundary_vertices
    free = np.ones(mesh.num_vertices, dtype=bool)
    free[dirichlet] = False
    # Dirichlet vertices take g, so only free vertices are traced
    inner = trace_feet(step.field, mesh.vertices[free], step.t_n, step.k_n,
                       domain=mesh.bounding_box, t_start=step.t_start)
    feet = mesh.vertices.copy()
    feet[free] = inner.feet
    iterations = np.zeros(mesh.num_vertices, dtype=np.int64)
    iterations[free] = inner.iterations
    trace = TraceResult(feet, iterations, inner.clamped_count)
    transported = transport_interpolate(step.u_prev, mesh, trace)

    g = _values(step.boundary, mesh.vertices[dirichlet], step.t_n)
    coefficients = transported.coefficients.copy()
    coefficients[dirichlet] = g
    transported = FeFunction(mesh, coefficients)

    f_h = FeFunction(mesh, _values(step.f, mesh.vertices, step.t_n))

    M = assemble_mass(mesh)
    A = assemble_stiffness(mesh, step.epsilon)
    system = (M / step.k_n + A).tocsr()
    rhs = M @ (transported.coefficients / step.k_n + f_h.coefficients)
    solve = dirichlet_solve(system, rhs, dirichlet, g, rtol=step.cg_rtol, x0=transported.coefficients)

    logger.debug("step to t=%.6g (k=%.3e): %d dof, %d CG iterations, residual %.2e",
                 step.t_n, step.k_n, mesh.num_vertices, solve.iterations, solve.residual)
    return StepOutput(
        u_new=FeFunction(mesh, solve.solution),
        u_transported=transported,
        trace=trace,
        linear_residual=solve.residual,
        f_h=f_h,
        iterations=solve.iterations,
        dirichlet=dirichlet,
        t_n=step.t_n,
        k_n=step.k_n,
        epsilon=step.epsilon,
    )
