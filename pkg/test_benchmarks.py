#!/usr/bin/env python3
"""
Benchmark tests - exact solutions, stable shock profiles, convergence study
"""

import logging

import mpmath
import numpy as np
import pytest
from scipy import integrate

from elm_adapt.benchmarks import (BENCHMARKS, cone_2d, convergence_study, erfc, erfcx, heat_1d, make_benchmark,
                                  naive_shock_profile, peak_1d, shock1_2d, shock2_2d, shock_factor)


def test_erfc_values():
    assert erfc(0.0) == pytest.approx(1.0)
    assert erfc(1.0) == pytest.approx(0.15729920705028513, rel=1e-14)
    x = np.linspace(-3.0, 3.0, 13)
    assert np.allclose(erfc(x) + erfc(-x), 2.0)
    assert erfcx(30.0) == pytest.approx(1.0 / (30.0 * np.sqrt(np.pi)), rel=1e-3)


def test_stable_profile_matches_naive_formula_where_finite():
    s = np.linspace(-1.0, 1.0, 201)
    stable = 0.5 * shock_factor(s, 0.5, 1e-2)
    naive = naive_shock_profile(s, 0.5, 1e-2)
    assert np.all(np.isfinite(naive))
    assert np.allclose(stable, naive, rtol=1e-9, atol=1e-300)


def test_shock2_has_no_overflow_for_tiny_epsilon():
    problem = shock2_2d(epsilon=1e-6)
    xs = np.linspace(0.0, 1.0, 101)
    X, Y = np.meshgrid(xs, xs)
    points = np.stack([X.ravel(), Y.ravel()], axis=1)
    values = problem.exact(points, 0.5)
    assert np.all(np.isfinite(values))
    assert values.min() >= 0.0 and values.max() <= 1.0 + 1e-12
    # the unstabilized formula breaks down on the same grid
    assert not np.all(np.isfinite(naive_shock_profile(xs, 0.5, 1e-6)))


@pytest.mark.parametrize("x", [0.499, 0.5, 0.5005, 0.501])
def test_shock_factor_against_high_precision(x):
    t, eps = 0.5, 1e-6
    with mpmath.workdps(50):
        s, tt, e = mpmath.mpf(x), mpmath.mpf(t), mpmath.mpf(eps)
        r = 2 * mpmath.sqrt(e * tt)
        expected = mpmath.erfc((s - tt) / r) + mpmath.exp(s / e) * mpmath.erfc((s + tt) / r)
        expected = float(expected)
    assert shock_factor(np.array([x]), t, eps)[0] == pytest.approx(expected, rel=1e-10, abs=1e-300)


def test_exact_solutions_start_from_initial_data(rng):
    for name, constructor in BENCHMARKS.items():
        problem = constructor()
        lower, upper = (np.array(b) for b in problem.domain)
        points = rng.uniform(lower, upper, size=(25, problem.dimension))
        assert np.allclose(problem.exact(points, 0.0), problem.initial(points)), name


def test_cone_rotates_clockwise():
    problem = cone_2d(epsilon=1e-4)
    t = np.pi / 2
    # (-0.5, 0) turns a quarter clockwise onto (0, 0.5)
    peak = problem.exact(np.array([[0.0, 0.5]]), t)[0]
    assert peak == pytest.approx(0.125 ** 2 / (0.125 ** 2 + 2e-4 * t))
    assert problem.exact(np.array([[-0.5, 0.0]]), t)[0] < 1e-6


def test_shock1_does_not_depend_on_y():
    problem = shock1_2d()
    points = np.array([[0.3, 0.0], [0.3, 0.5], [0.3, 1.0]])
    values = problem.exact(points, 0.25)
    assert np.allclose(values, values[0])


def test_make_benchmark_warns_about_unused_parameters(caplog):
    with caplog.at_level(logging.WARNING, logger="elm_adapt.benchmarks"):
        problem = make_benchmark("heat_1d", epsilon=0.5, lam=0.2)
    assert problem.epsilon == 0.5
    assert "ignores parameter(s): lam" in caplog.text
    with pytest.raises(KeyError):
        make_benchmark("wave_3d")


def test_registry_and_validation():
    assert sorted(BENCHMARKS) == ["cone_2d", "heat_1d", "peak_1d", "shock1_2d", "shock2_2d", "shock_1d"]
    with pytest.raises(ValueError):
        peak_1d(epsilon=0.0)
    with pytest.raises(ValueError):
        BENCHMARKS["shock_1d"](epsilon=-1e-6)


def test_flux_norm_matches_quadrature():
    problem = peak_1d(epsilon=0.01, lam=0.1)
    lam = 0.1

    def laplacian_sq(x):
        return ((x ** 2 / lam ** 4 - 1.0 / lam ** 2) * np.exp(-x ** 2 / (2 * lam ** 2))) ** 2

    value, _ = integrate.quad(laplacian_sq, -2.0, 2.0, points=[0.0], limit=200)
    assert problem.flux_norm == pytest.approx(0.01 * np.sqrt(value), rel=1e-8)
    assert make_benchmark("shock_1d").flux_norm is None


def test_heat_study_is_first_order():
    study = convergence_study(heat_1d(), [0.02, 0.01, 0.005], resolution=256)
    assert len(study.rows) == 3
    assert study.rows[0].order is None
    for order in study.orders:
        assert order == pytest.approx(1.0, abs=0.3)
    assert study.bound_holds
    assert study.spatial_fraction < 0.1
    assert len(study.rows[1].csv_row()) == 4
