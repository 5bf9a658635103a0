#!/usr/bin/env python3
"""
FEM tests - assembly, norms, evaluation, Dirichlet solves
"""

import numpy as np
import pytest

from elm_adapt.errors import NonPositiveEpsilon
from elm_adapt.fem import (FeFunction, assemble_mass, assemble_stiffness, dirichlet_solve, element_gradients,
                           energy_norm, energy_phi, eval_at_points, interpolate, interpolate_coarse,
                           interpolate_function, l2_error, l2_norm, l2_norm_quadrature)
from elm_adapt.mesh import Mesh, interval_mesh, rectangle_mesh, refine


def test_mass_matrix_integrates_constants(unit_interval, unit_square):
    for mesh in (unit_interval, unit_square):
        ones = np.ones(mesh.num_vertices)
        assert ones @ (assemble_mass(mesh) @ ones) == pytest.approx(1.0)


def test_assembled_matrices_are_symmetric(unit_square):
    M = assemble_mass(unit_square)
    A = assemble_stiffness(unit_square, 0.3)
    assert abs(M - M.T).max() == 0.0
    assert abs(A - A.T).max() == 0.0


def test_stiffness_annihilates_constants(unit_square):
    A = assemble_stiffness(unit_square, 1.0)
    assert np.allclose(A @ np.ones(unit_square.num_vertices), 0.0, atol=1e-12)


def test_stiffness_requires_positive_epsilon(unit_square):
    with pytest.raises(NonPositiveEpsilon):
        assemble_stiffness(unit_square, 0.0)


def test_energy_norm_of_linear_function(unit_square):
    u = interpolate(lambda p: p[:, 0] + 2.0 * p[:, 1], unit_square)
    eps = 0.01
    assert energy_norm(u, eps) == pytest.approx(np.sqrt(eps * 5.0))
    assert energy_phi(u, eps) == pytest.approx(0.5 * eps * 5.0)
    assert np.allclose(element_gradients(u), [1.0, 2.0])


def test_l2_norm_of_constant(unit_square):
    u = FeFunction(unit_square, np.full(unit_square.num_vertices, 3.0))
    assert l2_norm(u) == pytest.approx(3.0)


def test_linear_functions_are_reproduced(unit_square, rng):
    u = interpolate(lambda p: 1.0 - p[:, 0] + 0.5 * p[:, 1], unit_square)
    points = rng.uniform(0.0, 1.0, size=(50, 2))
    assert np.allclose(eval_at_points(u, points), 1.0 - points[:, 0] + 0.5 * points[:, 1])
    assert np.allclose(u(points), eval_at_points(u, points))


def test_transfer_to_refined_mesh_is_exact(unit_square):
    u = interpolate(lambda p: np.sin(3.0 * p[:, 0]) * p[:, 1], unit_square)
    fine = refine(unit_square, range(unit_square.num_elements))
    moved = interpolate_function(u, fine)
    assert np.allclose(moved.coefficients[:unit_square.num_vertices], u.coefficients)
    assert l2_norm(moved) == pytest.approx(l2_norm(u), rel=1e-12)


def test_arithmetic_needs_a_shared_mesh(unit_interval):
    u = FeFunction.zeros(unit_interval)
    other = FeFunction.zeros(interval_mesh(0.0, 1.0, 16))
    assert np.all((2.0 * (u + u) - u).coefficients == 0.0)
    with pytest.raises(ValueError):
        u - other


def test_coefficient_count_checked(unit_interval):
    with pytest.raises(ValueError):
        FeFunction(unit_interval, np.zeros(3))


def test_interpolation_error_of_quadratic():
    """|| x^2 - I_h x^2 || = h^2 / sqrt(30) on a uniform grid, integrated exactly."""
    mesh = interval_mesh(0.0, 1.0, 8)
    u = interpolate(lambda p: p[:, 0] ** 2, mesh)
    h = 1.0 / 8
    assert l2_error(u, lambda p: p[:, 0] ** 2) == pytest.approx(h ** 2 / np.sqrt(30.0), rel=1e-10)


def test_quadrature_norm_2d():
    mesh = rectangle_mesh((0.0, 0.0), (2.0, 1.0), 3, 2)
    # degree-4 rule is exact for (x y)^2
    assert l2_norm_quadrature(lambda p: p[:, 0] * p[:, 1], mesh) == pytest.approx(np.sqrt(8.0 / 9.0))


def test_dirichlet_poisson_1d_is_nodally_exact():
    """-u'' = 2 with u(0) = u(1) = 0 has u = x (1 - x); P1 is exact at the nodes."""
    mesh = interval_mesh(0.0, 1.0, 20)
    K = assemble_stiffness(mesh, 1.0)
    rhs = assemble_mass(mesh) @ np.full(mesh.num_vertices, 2.0)
    boundary = mesh.boundary_vertices
    result = dirichlet_solve(K, rhs, boundary, np.zeros(len(boundary)))
    x = mesh.vertices[:, 0]
    assert np.allclose(result.solution, x * (1.0 - x), atol=1e-10)
    assert result.iterations > 0
    assert result.residual <= 1e-10


def test_dirichlet_values_are_imposed(unit_square):
    K = assemble_stiffness(unit_square, 1.0)
    boundary = unit_square.boundary_vertices
    g = unit_square.vertices[boundary, 0]
    result = dirichlet_solve(K, np.zeros(unit_square.num_vertices), boundary, g)
    # harmonic extension of x is x itself
    assert np.allclose(result.solution, unit_square.vertices[:, 0], atol=1e-10)


def test_coarse_interpolant_keeps_shared_vertices(unit_square):
    fine = refine(unit_square, range(unit_square.num_elements))
    u = interpolate(lambda p: np.cos(2.0 * p[:, 0]) + p[:, 1] ** 2, fine)
    coarse = interpolate_coarse(u, unit_square)
    assert coarse.mesh is unit_square
    assert np.allclose(coarse.coefficients, u.coefficients[:unit_square.num_vertices], atol=1e-14)


@pytest.mark.parametrize("epsilon", [1.0, 0.01])
def test_energy_identity_and_convexity(unit_square, rng, epsilon):
    """a(w, w - v) = phi(w) - phi(v) + |||w - v|||^2 / 2, hence (A w, v - w) <= phi(v) - phi(w)."""
    A = assemble_stiffness(unit_square, epsilon)
    for _ in range(5):
        w = FeFunction(unit_square, rng.normal(size=unit_square.num_vertices))
        v = FeFunction(unit_square, rng.normal(size=unit_square.num_vertices))
        lhs = w.coefficients @ (A @ (w - v).coefficients)
        rhs = energy_phi(w, epsilon) - energy_phi(v, epsilon) + 0.5 * energy_norm(w - v, epsilon) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)
        gradient = A @ w.coefficients
        assert gradient @ (v - w).coefficients <= energy_phi(v, epsilon) - energy_phi(w, epsilon) + 1e-12


def test_1d_mass_and_stiffness_rows():
    mesh = interval_mesh(0.0, 1.0, 4)
    h, eps = 0.25, 0.3
    M = assemble_mass(mesh).toarray()
    A = assemble_stiffness(mesh, eps).toarray()
    assert np.allclose(M[2], [0.0, h / 6, 2 * h / 3, h / 6, 0.0], atol=1e-15)
    assert np.allclose(A[2], [0.0, -eps / h, 2 * eps / h, -eps / h, 0.0], atol=1e-14)
    # boundary rows only see one element
    assert M[0, 0] == pytest.approx(h / 3)
    assert A[0, 0] == pytest.approx(eps / h)


def test_single_triangle_mass_entries():
    mesh = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))
    area = 0.5
    M = assemble_mass(mesh).toarray()
    assert np.allclose(np.diag(M), area / 6)
    assert np.allclose(M[~np.eye(3, dtype=bool)], area / 12)
    A = assemble_stiffness(mesh, 1.0).toarray()
    assert np.allclose(A, [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
