#!/usr/bin/env python3
"""
Estimators - A posteriori indicators for the ELM step

Features:
- Temporal indicator xi along the characteristics (algebraic, exact matrices)
- Residual spatial indicator eta (interior residual + face jumps)
- Coarsening indicator zeta per removable-vertex patch
- Poincare surrogate for the source dual norm
- Running sum of the a posteriori bound (generic constant reported as 1)
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .characteristics import VelocityField, trace_feet
from .elm_solver import StepOutput
from .fem import (FeFunction, assemble_mass, element_gradients, element_mass, element_stiffness,
                  energy_norm, energy_phi, quadrature)
from .mesh import Mesh

logger = logging.getLogger(__name__)

STEP_CSV_COLUMNS = (
    "n", "t_n", "k_n", "xi_n", "eta_n", "zeta_total", "source_term",
    "bound_accumulator", "dof", "l2_error_if_exact_known",
)


@dataclass
class IndicatorReport:
    """Indicators of one accepted (or trial) step."""
    n: int = 0
    t_n: float = 0.0
    k_n: float = 0.0
    xi_n: float = 0.0
    eta_elements: np.ndarray = None
    eta_n: float = 0.0
    zeta_patches: np.ndarray = None
    zeta_total: float = 0.0
    source_term: float = 0.0
    bound_accumulator: float = 0.0
    dof: int = 0
    l2_error: Optional[float] = None
    xi_identity: float = 0.0
    energy_lhs: float = 0.0
    scale: float = 0.0

    def __post_init__(self):
        if self.eta_elements is None:
            self.eta_elements = np.zeros(0)
        if self.zeta_patches is None:
            self.zeta_patches = np.zeros(0)

    def csv_row(self) -> List:
        return [
            self.n, repr(float(self.t_n)), repr(float(self.k_n)), repr(float(self.xi_n)),
            repr(float(self.eta_n)), repr(float(self.zeta_total)), repr(float(self.source_term)),
            repr(float(self.bound_accumulator)), self.dof,
            "" if self.l2_error is None else repr(float(self.l2_error)),
        ]


# ----------------------------------------------------------------------
# temporal indicator
# ----------------------------------------------------------------------
def compute_xi(u_new: FeFunction, u_transported: FeFunction, f_h: FeFunction,
               k_n: float, epsilon: float) -> float:
    """xi = (f_h - d, d) - (phi(U) - phi(U~)) / k with d = (U - U~) / k."""
    M = assemble_mass(u_new.mesh)
    d = (u_new.coefficients - u_transported.coefficients) / k_n
    return float((f_h.coefficients - d) @ (M @ d)) - (
        energy_phi(u_new, epsilon) - energy_phi(u_transported, epsilon)) / k_n


def xi_identity(u_new: FeFunction, u_transported: FeFunction, k_n: float, epsilon: float) -> float:
    """|||U - U~|||^2 / (2k), which equals xi for an exact Galerkin step."""
    return energy_norm(u_new - u_transported, epsilon) ** 2 / (2.0 * k_n)


def energy_balance(u_new: FeFunction, u_transported: FeFunction, k_n: float,
                   epsilon: float) -> Tuple[float, float]:
    """
    Left side ||d||^2 + (phi(U) - phi(U~)) / k of the discrete energy
    inequality, and the scale of its terms.
    """
    M = assemble_mass(u_new.mesh)
    d = (u_new.coefficients - u_transported.coefficients) / k_n
    d_sq = float(d @ (M @ d))
    phi_new, phi_old = energy_phi(u_new, epsilon), energy_phi(u_transported, epsilon)
    return d_sq + (phi_new - phi_old) / k_n, d_sq + (abs(phi_new) + abs(phi_old)) / k_n


# ----------------------------------------------------------------------
# spatial indicator
# ----------------------------------------------------------------------
def jump_residuals(u: FeFunction) -> np.ndarray:
    """(grad U|high - grad U|low) . n on every interior face."""
    faces = u.mesh.interior_faces
    grads = element_gradients(u)
    jump = grads[faces.elements[:, 1]] - grads[faces.elements[:, 0]]
    return np.einsum('fd,fd->f', jump, faces.normal)


def compute_eta(mesh: Mesh, u_new: FeFunction, u_transported: FeFunction, f_h: FeFunction,
                k_n: float, epsilon: float) -> Tuple[np.ndarray, float]:
    """
    Per-element eta_tau = h_tau^2/eps ||R||^2 + eps sum_e h_e ||J_e||^2.

    R = f_h - (U - U~)/k is P1 (the Laplacian of a P1 function vanishes
    elementwise) and is integrated exactly. Each face jump is charged to
    both neighbours.
    """
    residual = f_h.coefficients - (u_new.coefficients - u_transported.coefficients) / k_n
    local = residual[mesh.elements]
    r_sq = np.einsum('ei,eij,ej->e', local, element_mass(mesh), local)
    eta = mesh.diameters ** 2 / epsilon * r_sq

    faces = mesh.interior_faces
    if len(faces.elements):
        jumps = jump_residuals(u_new)
        face_terms = epsilon * faces.diameter * jumps ** 2 * faces.measure
        eta = eta + np.bincount(faces.elements[:, 0], face_terms, minlength=mesh.num_elements)
        eta = eta + np.bincount(faces.elements[:, 1], face_terms, minlength=mesh.num_elements)
    return eta, float(eta.sum())


# ----------------------------------------------------------------------
# coarsening indicator
# ----------------------------------------------------------------------
def _coarse_index(fine: Mesh, coarse: Mesh) -> np.ndarray:
    """Coarse vertex id of every fine vertex, -1 where coarse has none."""
    lookup = {tuple(row): i for i, row in enumerate(coarse.vertices.tolist())}
    return np.array([lookup.get(tuple(row), -1) for row in fine.vertices.tolist()], dtype=np.int64)


def removed_vertex_patches(fine: Mesh, coarse: Mesh) -> List[Tuple[int, Tuple[int, ...]]]:
    """(vertex, fine elements) for every fine vertex that coarse no longer has."""
    removed = set(np.flatnonzero(_coarse_index(fine, coarse) < 0).tolist())
    if not removed:
        return []
    patches = [(p.vertex, p.elements) for p in fine.coarsening_patches() if p.vertex in removed]
    if len(patches) != len(removed):
        raise ValueError("coarse mesh is not one coarsening level above the fine mesh")
    return sorted(patches)


def element_zeta(u_new: FeFunction, coarse: Mesh, k_n: float, epsilon: float) -> np.ndarray:
    """
    Per fine element ||e||^2 + k eps ||grad e||^2 with e = U - I_H U.

    I_H U is lifted back through the hierarchy: a removed vertex is the
    midpoint of its parent edge, where the coarse function is linear.
    """
    fine = u_new.mesh
    index = _coarse_index(fine, coarse)
    coarse_u = np.zeros(coarse.num_vertices)
    coarse_u[index[index >= 0]] = u_new.coefficients[index >= 0]
    lifted = np.where(index >= 0, coarse_u[np.maximum(index, 0)], 0.0)
    removed = np.flatnonzero(index < 0)
    if len(removed):
        parents = fine.vertex_parents[removed]
        if np.any(parents < 0) or np.any(index[parents] < 0):
            raise ValueError("coarse mesh is not one coarsening level above the fine mesh")
        lifted[removed] = coarse_u[index[parents]].mean(axis=1)
    e = (u_new.coefficients - lifted)[fine.elements]
    mass = np.einsum('ei,eij,ej->e', e, element_mass(fine), e)
    grad = np.einsum('ei,eij,ej->e', e, element_stiffness(fine), e)
    return mass + k_n * epsilon * grad


def compute_zeta(u_new: FeFunction, coarse: Mesh, k_n: float, epsilon: float,
                 patches: Optional[Sequence[Tuple[int, Tuple[int, ...]]]] = None) -> Tuple[np.ndarray, float]:
    """Coarsening indicator per removed-vertex patch and its total."""
    if patches is None:
        patches = removed_vertex_patches(u_new.mesh, coarse)
    if not patches:
        return np.zeros(0), 0.0
    per_element = element_zeta(u_new, coarse, k_n, epsilon)
    values = np.array([per_element[list(elements)].sum() for _, elements in patches])
    return values, float(values.sum())


# ----------------------------------------------------------------------
# source term and bound
# ----------------------------------------------------------------------
def source_surrogate(f: Optional[Callable[[np.ndarray, float], np.ndarray]], f_h: FeFunction,
                     field: Optional[VelocityField], t_interval: Tuple[float, float],
                     epsilon: float) -> float:
    """
    (diam / pi) / sqrt(eps) * ||f(x(t_mid), t_mid) - f_h||, sampling f at the
    quadrature points traced back to the middle of the step.
    """
    if f is None:
        return 0.0
    mesh = f_h.mesh
    t_prev, t_n = t_interval
    bary, points, weights = quadrature(mesh)
    flat = points.reshape(-1, mesh.dimension)
    half = 0.5 * (t_n - t_prev)
    if field is not None and half > 0:
        flat = trace_feet(field, flat, t_n, half, domain=mesh.bounding_box).feet
    f_values = np.asarray(f(flat, t_n - half), dtype=float).reshape(points.shape[:2])
    fh_values = f_h.coefficients[mesh.elements] @ bary.T
    norm = float(np.sqrt(np.sum(weights * (f_values - fh_values) ** 2)))
    return mesh.diameter / np.pi / np.sqrt(epsilon) * norm


def accumulate_bound(history: Iterable[IndicatorReport], initial_error_sq: float = 0.0) -> float:
    """||u0 - U0||^2 + sum k^2 xi + sum k eta + sum k S^2."""
    total = initial_error_sq
    for report in history:
        total += bound_increment(report)
    return total


def bound_increment(report: IndicatorReport) -> float:
    k = report.k_n
    return k * k * max(report.xi_n, 0.0) + k * report.eta_n + k * report.source_term ** 2


# ----------------------------------------------------------------------
# bundling
# ----------------------------------------------------------------------
def estimate_step(step: StepOutput, f=None, field: Optional[VelocityField] = None) -> IndicatorReport:
    """Temporal, spatial and source indicators of a solved step."""
    u, ut = step.u_new, step.u_transported
    xi = compute_xi(u, ut, step.f_h, step.k_n, step.epsilon)
    eta_elements, eta = compute_eta(step.mesh, u, ut, step.f_h, step.k_n, step.epsilon)
    source = source_surrogate(f, step.f_h, field, (step.t_n - step.k_n, step.t_n), step.epsilon)
    energy_lhs, scale = energy_balance(u, ut, step.k_n, step.epsilon)
    return IndicatorReport(
        t_n=step.t_n,
        k_n=step.k_n,
        xi_n=xi,
        eta_elements=eta_elements,
        eta_n=eta,
        source_term=source,
        dof=step.mesh.num_vertices,
        xi_identity=xi_identity(u, ut, step.k_n, step.epsilon),
        energy_lhs=energy_lhs,
        scale=scale,
    )
