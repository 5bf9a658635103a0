#!/usr/bin/env python3
"""
FEM - Continuous piecewise-linear finite elements

Features:
- P1 functions on 1D/2D meshes (evaluation, arithmetic, transfer between meshes)
- Exact mass and stiffness assembly into scipy CSR matrices
- Energy functional phi and energy norm
- Dirichlet elimination with Jacobi-preconditioned conjugate gradients
- Gauss quadrature L2 norms (3-point in 1D, 6-point degree-4 in 2D)
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .errors import NonPositiveEpsilon, SolverDiverged
from .mesh import Mesh

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class FeFunction:
    """P1 function: a mesh plus one coefficient per vertex."""
    mesh: Mesh
    coefficients: np.ndarray

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if len(coefficients) != self.mesh.num_vertices:
            raise ValueError(f"expected {self.mesh.num_vertices} coefficients, got {len(coefficients)}")
        object.__setattr__(self, 'coefficients', coefficients)

    def __call__(self, points) -> np.ndarray:
        return eval_at_points(self, points)

    def _check_same_mesh(self, other: "FeFunction"):
        if other.mesh is not self.mesh:
            raise ValueError("FeFunction arithmetic needs both operands on the same mesh")

    def __add__(self, other: "FeFunction") -> "FeFunction":
        self._check_same_mesh(other)
        return FeFunction(self.mesh, self.coefficients + other.coefficients)

    def __sub__(self, other: "FeFunction") -> "FeFunction":
        self._check_same_mesh(other)
        return FeFunction(self.mesh, self.coefficients - other.coefficients)

    def __mul__(self, scalar: float) -> "FeFunction":
        return FeFunction(self.mesh, float(scalar) * self.coefficients)

    __rmul__ = __mul__

    def __neg__(self) -> "FeFunction":
        return FeFunction(self.mesh, -self.coefficients)

    @classmethod
    def zeros(cls, mesh: Mesh) -> "FeFunction":
        return cls(mesh, np.zeros(mesh.num_vertices))


@dataclass
class LinearSolve:
    """Result of a Dirichlet-eliminated CG solve."""
    solution: np.ndarray
    iterations: int
    residual: float


# ----------------------------------------------------------------------
# element matrices and assembly
# ----------------------------------------------------------------------
def basis_gradients(mesh: Mesh) -> np.ndarray:
    """(ne, d+1, d) gradients of the barycentric basis functions."""
    inverse = mesh._inverse_maps
    grads = np.concatenate([-inverse.sum(axis=1, keepdims=True), inverse], axis=1)
    return grads


def element_mass(mesh: Mesh) -> np.ndarray:
    d = mesh.dimension
    local = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    return mesh.measures[:, None, None] * local[None, :, :]


def element_stiffness(mesh: Mesh) -> np.ndarray:
    """Unit-coefficient element stiffness matrices."""
    grads = basis_gradients(mesh)
    return mesh.measures[:, None, None] * np.einsum('eik,ejk->eij', grads, grads)


def _assemble(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    n = mesh.dimension + 1
    rows = np.repeat(mesh.elements, n, axis=1).reshape(-1)
    cols = np.tile(mesh.elements, (1, n)).reshape(-1)
    matrix = sp.coo_matrix((local.reshape(-1), (rows, cols)),
                           shape=(mesh.num_vertices, mesh.num_vertices)).tocsr()
    return ((matrix + matrix.T) * 0.5).tocsr()


@lru_cache(maxsize=16)
def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Exact P1 mass matrix."""
    return _assemble(mesh, element_mass(mesh))


@lru_cache(maxsize=16)
def _unit_stiffness(mesh: Mesh) -> sp.csr_matrix:
    return _assemble(mesh, element_stiffness(mesh))


def assemble_stiffness(mesh: Mesh, epsilon: float) -> sp.csr_matrix:
    """P1 stiffness matrix of a(v, w) = epsilon (grad v, grad w)."""
    if not epsilon > 0:
        raise NonPositiveEpsilon(epsilon)
    return (epsilon * _unit_stiffness(mesh)).tocsr()


# ----------------------------------------------------------------------
# functionals and norms
# ----------------------------------------------------------------------
def energy_phi(u: FeFunction, epsilon: float) -> float:
    c = u.coefficients
    return 0.5 * float(c @ (assemble_stiffness(u.mesh, epsilon) @ c))


def energy_norm(u: FeFunction, epsilon: float) -> float:
    return float(np.sqrt(max(2.0 * energy_phi(u, epsilon), 0.0)))


def l2_norm(u: FeFunction) -> float:
    """L2 norm through the mass matrix."""
    c = u.coefficients
    return float(np.sqrt(max(float(c @ (assemble_mass(u.mesh) @ c)), 0.0)))


def element_gradients(u: FeFunction) -> np.ndarray:
    """(ne, d) constant gradient of u on each element."""
    grads = basis_gradients(u.mesh)
    return np.einsum('ei,eik->ek', u.coefficients[u.mesh.elements], grads)


# ----------------------------------------------------------------------
# evaluation and interpolation
# ----------------------------------------------------------------------
def eval_at_points(u: FeFunction, points) -> np.ndarray:
    """Barycentric interpolation of the vertex coefficients."""
    mesh = u.mesh
    points = np.asarray(points, dtype=float).reshape(-1, mesh.dimension)
    ids, bary = mesh.locate_points(points)
    return np.einsum('ni,ni->n', bary, u.coefficients[mesh.elements[ids]])


def interpolate(g: PointFunction, mesh: Mesh) -> FeFunction:
    """Nodal interpolant of a pointwise function g(points) -> values."""
    values = np.asarray(g(mesh.vertices), dtype=float).reshape(-1)
    return FeFunction(mesh, np.broadcast_to(values, (mesh.num_vertices,)).copy())


def interpolate_function(u: FeFunction, mesh: Mesh) -> FeFunction:
    """Nodal interpolant of an FE function on another mesh covering the domain."""
    if mesh is u.mesh:
        return FeFunction(mesh, u.coefficients.copy())
    return FeFunction(mesh, eval_at_points(u, mesh.vertices))


def interpolate_coarse(u: FeFunction, coarse: Mesh) -> FeFunction:
    return interpolate_function(u, coarse)


# ----------------------------------------------------------------------
# quadrature
# ----------------------------------------------------------------------
_G = np.sqrt(3.0 / 5.0)
# barycentric points and weights on the reference simplex (weights sum to 1)
QUADRATURE_1D = (
    np.array([[0.5 * (1 + _G), 0.5 * (1 - _G)], [0.5, 0.5], [0.5 * (1 - _G), 0.5 * (1 + _G)]]),
    np.array([5.0, 8.0, 5.0]) / 18.0,
)
_A, _B = 0.445948490915965, 0.108103018168070
_C, _D = 0.091576213509771, 0.816847572980459
QUADRATURE_2D = (
    np.array([
        [_A, _A, _B], [_A, _B, _A], [_B, _A, _A],
        [_C, _C, _D], [_C, _D, _C], [_D, _C, _C],
    ]),
    np.array([0.223381589678011] * 3 + [0.109951743655322] * 3),
)


def quadrature(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Quadrature points on every element.

    Returns:
        barycentric (nq, d+1), points (ne, nq, d), weights (ne, nq)
    """
    bary, weights = QUADRATURE_1D if mesh.dimension == 1 else QUADRATURE_2D
    corners = mesh.vertices[mesh.elements]  # (ne, d+1, d)
    points = np.einsum('qi,eid->eqd', bary, corners)
    return bary, points, mesh.measures[:, None] * weights[None, :]


def _evaluate_on(g: PointFunction, points: np.ndarray) -> np.ndarray:
    flat = points.reshape(-1, points.shape[-1])
    values = np.asarray(g(flat), dtype=float).reshape(-1)
    return np.broadcast_to(values, (len(flat),)).reshape(points.shape[:-1])


def l2_norm_quadrature(g: PointFunction, mesh: Mesh) -> float:
    _, points, weights = quadrature(mesh)
    values = _evaluate_on(g, points)
    return float(np.sqrt(np.sum(weights * values ** 2)))


def element_l2_squared(u: FeFunction, g: Optional[PointFunction] = None) -> np.ndarray:
    """Per-element ||u - g||^2 by quadrature (g=None gives ||u||^2)."""
    bary, points, weights = quadrature(u.mesh)
    values = u.coefficients[u.mesh.elements] @ bary.T  # (ne, nq)
    if g is not None:
        values = values - _evaluate_on(g, points)
    return np.sum(weights * values ** 2, axis=1)


def l2_error(u: FeFunction, exact: PointFunction) -> float:
    return float(np.sqrt(element_l2_squared(u, exact).sum()))


# ----------------------------------------------------------------------
# linear solve
# ----------------------------------------------------------------------
def dirichlet_solve(K: sp.spmatrix, rhs: np.ndarray, boundary: np.ndarray,
                    values: np.ndarray, rtol: float = 1e-12,
                    x0: Optional[np.ndarray] = None) -> LinearSolve:
    """
    Solve K x = rhs with x[boundary] = values.

    The boundary rows and columns are eliminated and the reduced SPD
    system goes to Jacobi-preconditioned CG.

    Raises:
        SolverDiverged: CG needs more than 10 * dof iterations
    """
    K = sp.csr_matrix(K)
    n = K.shape[0]
    boundary = np.asarray(boundary, dtype=np.int64)
    x = np.zeros(n)
    x[boundary] = values
    free = np.ones(n, dtype=bool)
    free[boundary] = False
    if not np.any(free):
        return LinearSolve(x, 0, 0.0)

    K_ff = K[free][:, free]
    b = np.asarray(rhs, dtype=float)[free] - K[free][:, boundary] @ x[boundary]
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return LinearSolve(x, 0, 0.0)

    inv_diag = 1.0 / K_ff.diagonal()
    preconditioner = LinearOperator(K_ff.shape, matvec=lambda r: inv_diag * r, dtype=float)
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    maxiter = 10 * K_ff.shape[0]
    start = None if x0 is None else np.asarray(x0, dtype=float)[free]
    solution, info = cg(K_ff, b, x0=start, rtol=rtol, atol=0.0, maxiter=maxiter,
                        M=preconditioner, callback=count)
    residual = float(np.linalg.norm(b - K_ff @ solution)) / b_norm
    if info != 0:
        raise SolverDiverged(iterations, residual)
    logger.debug("CG converged in %d iterations (relative residual %.2e)", iterations, residual)
    x[free] = solution
    return LinearSolve(x, iterations, residual)
