#!/usr/bin/env python3
"""
Adaptivity tests - time test, marking, step control, coupled loop
"""

import logging

import numpy as np
import pytest

from elm_adapt.adaptivity import (TimeDecision, _step_to, mark_coarsen, mark_refine, run_algorithm1,
                                  run_algorithm2, run_uniform, time_test)
from elm_adapt.benchmarks import cone_2d, heat_1d, peak_1d, shock_1d
from elm_adapt.config import Tolerances
from elm_adapt.errors import StepUnderflow
from elm_adapt.events import EventLog, EventType
from elm_adapt.monitor import RunMonitor


@pytest.fixture
def tol():
    return Tolerances(tol_time=1e-2, tol_space=1e-2, T=1.0)


def test_time_test_decisions(tol):
    # TOL/(2T) = 5e-3, sqrt(TOL)/(2T) = 0.05
    assert time_test(xi_n=0.6, source_term=0.0, k_n=0.01, tol=tol) is TimeDecision.REJECT
    assert time_test(xi_n=0.4, source_term=0.0, k_n=0.01, tol=tol) is TimeDecision.ACCEPT
    assert time_test(xi_n=0.1, source_term=0.0, k_n=0.01, tol=tol) is TimeDecision.GROW
    assert time_test(xi_n=0.0, source_term=0.06, k_n=0.01, tol=tol) is TimeDecision.REJECT
    assert time_test(xi_n=0.0, source_term=0.04, k_n=0.01, tol=tol) is TimeDecision.ACCEPT


def test_mark_refine_maximum_strategy(tol):
    assert mark_refine([1.0, 0.4, 0.6, 0.1], tol) == {0, 2}
    assert mark_refine([1e-3, 2e-3], tol) == set()
    assert mark_refine([], tol) == set()


def test_mark_coarsen_budget():
    tol = Tolerances(tol_space=1e-2, tol_coarsen=1e-3)
    # budget 1e-3 / (1 * 3)
    assert mark_coarsen([1e-6, 1e-2, 1e-5], tol) == {0, 2}
    assert mark_coarsen([], tol) == set()


def test_step_to_lands_on_final_time():
    assert _step_to(0.9, 0.25, 1.0) == pytest.approx((0.1, 1.0))
    k, t = _step_to(0.5, 0.1, 1.0)
    assert k == 0.1 and t == pytest.approx(0.6)


def test_uniform_run_has_constant_steps():
    problem = heat_1d()
    tol = Tolerances(T=0.1, k0=0.01, k_max=0.25)
    trajectory = run_uniform(problem, problem.initial_mesh(32), tol)
    assert trajectory.accepted_steps == 10
    assert np.all(trajectory.step_sizes == 0.01)
    assert trajectory.step_sizes.sum() == pytest.approx(0.1, abs=1e-12)
    assert trajectory.state.t_n == 0.1
    assert trajectory.final_error < 0.05
    assert trajectory.counters.rejects == 0


def test_uniform_run_truncates_the_last_step():
    problem = heat_1d()
    tol = Tolerances(T=0.1, k0=0.03, k_max=0.25)
    trajectory = run_uniform(problem, problem.initial_mesh(16), tol)
    assert trajectory.step_sizes.tolist()[:3] == [0.03, 0.03, 0.03]
    assert trajectory.step_sizes[-1] == pytest.approx(0.01)
    assert trajectory.state.t_n == 0.1


def test_bound_accumulates_per_step():
    problem = heat_1d()
    tol = Tolerances(T=0.05, k0=0.01)
    trajectory = run_uniform(problem, problem.initial_mesh(32), tol)
    bounds = [r.bound_accumulator for r in trajectory.reports]
    assert np.all(np.diff(bounds) >= 0)
    assert bounds[-1] == pytest.approx(trajectory.state.bound)


def test_algorithm1_grows_and_beats_the_uniform_baseline():
    problem = shock_1d()
    mesh = problem.initial_mesh(64)
    tol = Tolerances(tol_time=1e-2, T=1.0, k0=0.01, k_max=0.25)
    events = EventLog()
    adaptive = run_algorithm1(problem, mesh, tol, events=events)
    baseline = run_uniform(problem, mesh, tol)

    assert adaptive.state.t_n == 1.0
    assert adaptive.step_sizes.sum() == pytest.approx(1.0, abs=1e-12)
    assert events.count(EventType.GROW) >= 1
    assert adaptive.accepted_steps < baseline.accepted_steps
    assert adaptive.dof_steps < baseline.dof_steps
    assert adaptive.final_error <= 1.1 * baseline.final_error


def test_step_underflow_is_raised():
    problem = peak_1d()
    tol = Tolerances(tol_time=1e-30, T=1.0, k0=0.01, k_min=1e-3)
    events = EventLog()
    with pytest.raises(StepUnderflow):
        run_algorithm1(problem, problem.initial_mesh(32), tol, events=events)
    assert events.count(EventType.REJECT) >= 3


def test_algorithm2_refines_a_coarse_mesh():
    problem = peak_1d()
    tol = Tolerances(tol_time=1e-1, tol_space=1e-2, T=0.2, k0=0.02, k_max=0.1)
    events = EventLog()
    trajectory = run_algorithm2(problem, problem.initial_mesh(32), tol, events=events)
    state = trajectory.state
    assert state.t_n == 0.2
    assert trajectory.step_sizes.sum() == pytest.approx(0.2, abs=1e-12)
    assert trajectory.counters.refines >= 1
    assert events.count(EventType.REFINE) == trajectory.counters.refines
    assert state.mesh.num_vertices > 33
    assert state.mesh.is_conforming()
    assert state.bound >= trajectory.reports[0].bound_accumulator


def test_algorithm2_runs_in_2d():
    problem = cone_2d(epsilon=1e-3)
    tol = Tolerances(tol_time=1e-1, tol_space=2e-3, T=0.05, k0=0.025, k_max=0.05)
    trajectory = run_algorithm2(problem, problem.initial_mesh(8), tol)
    assert trajectory.state.t_n == 0.05
    assert trajectory.counters.refines >= 1
    assert trajectory.state.mesh.is_conforming()
    assert trajectory.reports[-1].dof == trajectory.state.mesh.num_vertices
    assert trajectory.final_error is not None


def test_algorithm2_coarsens_behind_a_moving_peak():
    problem = peak_1d()
    tol = Tolerances(tol_space=1e-2, T=0.6)
    events = EventLog()
    trajectory = run_algorithm2(problem, problem.initial_mesh(32), tol, events=events)
    assert trajectory.state.t_n == 0.6
    assert trajectory.counters.refines >= 1
    assert trajectory.counters.coarsens >= 1
    assert events.count(EventType.COARSEN) == trajectory.counters.coarsens
    assert any(len(r.zeta_patches) > 0 for r in trajectory.reports)
    assert trajectory.state.mesh.is_conforming()
    for r in trajectory.reports:
        assert r.k_n * r.xi_n <= tol.tol_time / (2.0 * tol.T) * (1.0 + 1e-12)


def test_clamped_feet_are_counted_not_warned(caplog):
    problem = peak_1d()
    monitor = RunMonitor()
    tol = Tolerances(T=0.3, k0=0.1)
    with caplog.at_level(logging.DEBUG, logger="elm_adapt"):
        run_uniform(problem, problem.initial_mesh(48), tol, monitor=monitor)
    assert monitor.counters["clamped_feet"] > 0
    assert monitor.counters["solves"] == 3
    assert not [r for r in caplog.records if r.levelno >= logging.WARNING]
    assert any("clamped" in r.getMessage() for r in caplog.records if r.levelno == logging.DEBUG)
