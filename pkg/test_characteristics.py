#!/usr/bin/env python3
"""
Characteristic tracing tests - mid-point feet, volume preservation, 3D composition
"""

import numpy as np
import pytest

from elm_adapt.characteristics import (VelocityField, abc_field, check_divergence_free, constant_field,
                                       decompose_weyl_3d, extrapolated_velocity, flow_jacobian_det,
                                       rk4_reference, rotation_field, shear_field, stream_function_field,
                                       trace_3d_volume_preserving, trace_diagnostics, trace_feet)
from elm_adapt.errors import GradientUnavailable, NoConvergence

GRID = np.array([[x, y] for x in (0.15, 0.4, 0.65, 0.9) for y in (0.2, 0.45, 0.7)])


def swirl_3d(with_gradient: bool = True) -> VelocityField:
    """Divergence-free field with d b1 / d y1 != 0."""

    def evaluate(x, t):
        y1, y2 = x[:, 0], x[:, 1]
        return np.stack([np.sin(y1) * np.cos(y2), -np.cos(y1) * np.sin(y2), np.sin(y1 + y2)], axis=1)

    def gradient(x, t):
        y1, y2 = x[:, 0], x[:, 1]
        jac = np.zeros((len(x), 3, 3))
        jac[:, 0, 0] = np.cos(y1) * np.cos(y2)
        jac[:, 0, 1] = -np.sin(y1) * np.sin(y2)
        jac[:, 1, 0] = np.sin(y1) * np.sin(y2)
        jac[:, 1, 1] = -np.cos(y1) * np.cos(y2)
        jac[:, 2, 0] = np.cos(y1 + y2)
        jac[:, 2, 1] = np.cos(y1 + y2)
        return jac

    return VelocityField(3, evaluate, gradient if with_gradient else None, name="swirl")


def test_constant_field_feet_are_exact():
    result = trace_feet(constant_field([1.0, -0.5]), GRID, t=1.0, k=0.1)
    assert np.allclose(result.feet, GRID - 0.1 * np.array([1.0, -0.5]), atol=1e-14)
    assert np.all(result.iterations <= 2)
    assert result.clamped_count == 0


@pytest.mark.parametrize("field", [rotation_field(), shear_field(2.0)], ids=["rotation", "shear"])
@pytest.mark.parametrize("k", [0.05, 0.2, 0.5])
def test_linear_fields_preserve_area(field, k):
    for point in GRID:
        assert abs(flow_jacobian_det(field, point, t=0.0, k=k) - 1.0) <= 1e-9


def test_stream_function_midpoint_preserves_area():
    for point in GRID:
        assert abs(flow_jacobian_det(stream_function_field(), point, t=0.0, k=0.05) - 1.0) <= 1e-8


def test_explicit_midpoint_defect_is_third_order():
    ks = [0.01, 0.005, 0.0025]
    rows = trace_diagnostics(stream_function_field(), GRID, ks, scheme="explicit-midpoint")
    defects = np.array([row.max_det_defect for row in rows])
    slope = np.polyfit(np.log(ks), np.log(defects), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.5)


def test_rotation_feet_match_exact_rotation():
    """The implicit mid-point rule is the Cayley map: it rotates by 2 atan(k/2)."""
    k = 0.3
    feet = trace_feet(rotation_field(), GRID, t=0.0, k=k).feet
    angle = 2.0 * np.arctan(0.5 * k)
    c, s = np.cos(angle), np.sin(angle)
    # backward along b = (y, -x) turns counter-clockwise
    expected = GRID @ np.array([[c, s], [-s, c]])
    assert np.allclose(feet, expected, atol=1e-11)


def test_fixed_point_failure_raises():
    with pytest.raises(NoConvergence):
        trace_feet(stream_function_field(), np.array([[0.3, 0.2]]), t=0.0, k=2.0, max_iter=3)


def test_unknown_scheme_rejected():
    with pytest.raises(ValueError):
        trace_feet(rotation_field(), GRID, t=0.0, k=0.1, scheme="euler")


def test_feet_leaving_the_box_are_clamped():
    result = trace_feet(constant_field([1.0, 0.0]), np.array([[0.05, 0.5], [0.5, 0.5]]), t=0.1, k=0.1,
                        domain=((0.0, 0.0), (1.0, 1.0)))
    assert result.clamped_count == 1
    assert np.allclose(result.feet, [[0.0, 0.5], [0.4, 0.5]])


def test_velocity_extrapolation():
    field = VelocityField(2, lambda x, t: np.tile([t, 0.0], (len(x), 1)), name="ramp")
    point = np.array([[0.5, 0.5]])
    assert extrapolated_velocity(field, 1.0, 0.1)(point)[0, 0] == pytest.approx(0.95)
    # t - 2k falls before the start: use b(t - k) alone
    assert extrapolated_velocity(field, 1.0, 0.1, t_start=0.85)(point)[0, 0] == pytest.approx(0.9)


def test_divergence_checks():
    points = np.random.default_rng(3).uniform(0.0, 1.0, size=(20, 2))
    assert check_divergence_free(stream_function_field(), points)
    compressing = VelocityField(2, lambda x, t: -x, name="sink", divergence_free=False)
    assert not check_divergence_free(compressing, points)


def test_abc_field_is_divergence_free():
    points = np.random.default_rng(4).uniform(0.0, 2.0 * np.pi, size=(20, 3))
    assert check_divergence_free(abc_field(), points, tol=1e-12)


def test_weyl_parts_are_divergence_free():
    points = np.random.default_rng(5).uniform(0.0, 2.0, size=(10, 3))
    field = swirl_3d()
    assert check_divergence_free(field, points, tol=1e-7)
    part1, part2 = decompose_weyl_3d(field, anchor=[0.0, 0.7, 0.0])
    assert check_divergence_free(part1, points, tol=1e-7)
    assert check_divergence_free(part2, points, tol=1e-7)
    assert np.allclose(part1(points, 0.0) + part2(points, 0.0), field(points, 0.0), atol=1e-12)


def test_weyl_needs_gradient_without_fd():
    with pytest.raises(GradientUnavailable):
        decompose_weyl_3d(swirl_3d(with_gradient=False), anchor=[0.0, 0.0, 0.0], allow_fd=False)
    with pytest.raises(ValueError):
        decompose_weyl_3d(rotation_field(), anchor=[0.0, 0.0, 0.0])


@pytest.mark.parametrize("composition", ["strang", "lie"])
def test_3d_step_preserves_volume(composition):
    points = np.random.default_rng(6).uniform(0.0, 2.0 * np.pi, size=(6, 3))
    for field in (abc_field(), swirl_3d()):
        for point in points:
            det = flow_jacobian_det(field, point, t=0.0, k=0.1, composition=composition)
            assert abs(det - 1.0) <= 1e-6


def test_3d_strang_is_second_order():
    field = abc_field()
    points = np.random.default_rng(7).uniform(0.0, 2.0 * np.pi, size=(4, 3))
    T = 0.4
    reference = rk4_reference(field, points, t=T, k=T, substeps=4000)
    ks = [0.1, 0.05, 0.025, 0.0125]
    errors = []
    for k in ks:
        y = points.copy()
        steps = int(round(T / k))
        for j in range(steps):
            y = trace_3d_volume_preserving(field, y, t=T - j * k, k=k)
        errors.append(np.max(np.linalg.norm(y - reference, axis=1)))
    slope = np.polyfit(np.log(ks), np.log(errors), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


def test_trace_diagnostics_rows():
    rows = trace_diagnostics(rotation_field(), GRID, [0.1, 0.2])
    assert [row.k for row in rows] == [0.1, 0.2]
    assert all(row.max_det_defect <= 1e-9 for row in rows)
    assert all(row.mean_iterations >= 1 for row in rows)
    assert len(rows[0].csv_row()) == 4
