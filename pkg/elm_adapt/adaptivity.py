#!/usr/bin/env python3
"""
Adaptivity - Time-step control and coupled space-time adaptation

Features:
- Time test with reject / accept / grow decision
- Maximum-strategy refinement marking, equidistributed coarsening marking
- Step-size control on a fixed mesh (reject-and-halve, grow-next-step)
- Coupled loop: trial solve, time rejects, refine loop, coarsen, growth
- Fixed-step baseline driver
- Event log and per-step reports for every accepted step
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .config import Tolerances
from .elm_solver import StepInput, StepOutput, elm_step
from .errors import StepUnderflow
from .estimators import IndicatorReport, bound_increment, compute_zeta, estimate_step, removed_vertex_patches
from .events import EventLog, EventType
from .fem import FeFunction, interpolate, l2_error
from .mesh import Mesh, coarsen, refine
from .monitor import RunMonitor

logger = logging.getLogger(__name__)

# relative slack when deciding that a step reaches T
_END_SLACK = 1e-12


class TimeDecision(Enum):
    REJECT = "reject"
    ACCEPT = "accept"
    GROW = "grow"


@dataclass
class AdaptCounters:
    rejects: int = 0
    refines: int = 0
    coarsens: int = 0
    grows: int = 0
    refine_cap_hits: int = 0
    coarsen_reverts: int = 0


@dataclass
class AdaptState:
    """Solution and bookkeeping at the last accepted time."""
    n: int
    t_n: float
    k_n: float
    mesh: Mesh
    u: FeFunction
    history: List[IndicatorReport] = field(default_factory=list)
    counters: AdaptCounters = field(default_factory=AdaptCounters)
    bound: float = 0.0


@dataclass
class Trajectory:
    """Result of a driver run."""
    state: AdaptState
    events: EventLog
    initial_error_sq: float = 0.0

    @property
    def reports(self) -> List[IndicatorReport]:
        return self.state.history

    @property
    def counters(self) -> AdaptCounters:
        return self.state.counters

    @property
    def step_sizes(self) -> np.ndarray:
        return np.array([r.k_n for r in self.reports])

    @property
    def accepted_steps(self) -> int:
        return len(self.reports)

    @property
    def dof_steps(self) -> int:
        return int(sum(r.dof for r in self.reports))

    @property
    def final_error(self) -> Optional[float]:
        return self.reports[-1].l2_error if self.reports else None

    @property
    def max_error(self) -> Optional[float]:
        errors = [r.l2_error for r in self.reports if r.l2_error is not None]
        return max(errors) if errors else None


# ----------------------------------------------------------------------
# decisions and marking
# ----------------------------------------------------------------------
def time_test(xi_n: float, source_term: float, k_n: float, tol: Tolerances) -> TimeDecision:
    """
    Reject unless k xi <= TOL/(2T) and S <= sqrt(TOL)/(2T); grow when both
    hold with TOL replaced by theta * TOL.
    """
    limit = tol.tol_time / (2.0 * tol.T)
    source_limit = np.sqrt(tol.tol_time) / (2.0 * tol.T)
    if k_n * xi_n > limit or source_term > source_limit:
        return TimeDecision.REJECT
    if k_n * xi_n <= tol.theta * limit and source_term <= np.sqrt(tol.theta) * source_limit:
        return TimeDecision.GROW
    return TimeDecision.ACCEPT


def mark_refine(eta_elements: Sequence[float], tol: Tolerances, T: Optional[float] = None) -> Set[int]:
    """Maximum strategy: every element with eta >= theta_mark * max eta, once eta_n > TOL_space/T."""
    eta = np.asarray(eta_elements, dtype=float)
    T = tol.T if T is None else T
    if len(eta) == 0 or eta.sum() <= tol.tol_space / T:
        return set()
    return set(np.flatnonzero(eta >= tol.theta_mark * eta.max()).tolist())


def mark_coarsen(zeta_patches: Sequence[float], tol: Tolerances, T: Optional[float] = None,
                 patch_count: Optional[int] = None) -> Set[int]:
    """Patches whose zeta fits the equidistributed budget TOL_coarsen / (T * count)."""
    zeta = np.asarray(zeta_patches, dtype=float)
    T = tol.T if T is None else T
    count = len(zeta) if patch_count is None else patch_count
    if count == 0:
        return set()
    return set(np.flatnonzero(zeta <= tol.tol_coarsen / (T * count)).tolist())


# ----------------------------------------------------------------------
# step machinery
# ----------------------------------------------------------------------
class StepRunner:
    """Solves and estimates steps of one problem."""

    def __init__(self, problem, tol: Tolerances, cg_rtol: float = 1e-12,
                 monitor: Optional[RunMonitor] = None, events: Optional[EventLog] = None):
        self.problem = problem
        self.tol = tol
        self.cg_rtol = cg_rtol
        self.monitor = monitor or RunMonitor()
        self.events = events or EventLog()

    def solve(self, mesh: Mesh, u_prev: FeFunction, t_prev: float, k: float) -> Tuple[StepOutput, IndicatorReport]:
        problem = self.problem
        with self.monitor.timer("solve"):
            step = elm_step(StepInput(
                mesh=mesh,
                u_prev=u_prev,
                field=problem.velocity,
                f=problem.source,
                t_n=t_prev + k,
                k_n=k,
                epsilon=problem.epsilon,
                boundary=problem.boundary,
                t_start=0.0,
                cg_rtol=self.cg_rtol,
            ))
        with self.monitor.timer("estimate"):
            report = estimate_step(step, problem.source, problem.velocity)
        self.monitor.increment("solves")
        self.monitor.increment("clamped_feet", step.trace.clamped_count)
        return step, report

    def decide(self, report: IndicatorReport) -> TimeDecision:
        return time_test(report.xi_n, report.source_term, report.k_n, self.tol)

    def shrink(self, state: AdaptState, k: float) -> float:
        rejected, k = k, self.tol.delta1 * k
        state.counters.rejects += 1
        self.events.publish(EventType.REJECT, state.n + 1, state.t_n, rejected, new_k=k)
        logger.info("step %d rejected at t=%.6g, retrying with k=%.3e", state.n + 1, state.t_n, k)
        if k < self.tol.k_min:
            raise StepUnderflow(k, self.tol.k_min, state.t_n)
        return k

    def next_step_size(self, state: AdaptState, decision: TimeDecision, k: float) -> float:
        if decision is TimeDecision.GROW:
            grown = min(self.tol.delta2 * k, self.tol.k_max)
            state.counters.grows += 1
            self.events.publish(EventType.GROW, state.n, state.t_n, k, new_k=grown)
            return grown
        return min(max(k, self.tol.k_min), self.tol.k_max)

    def accept(self, state: AdaptState, step: StepOutput, report: IndicatorReport,
               t_new: float) -> AdaptState:
        exact = getattr(self.problem, "exact", None)
        error = l2_error(step.u_new, lambda p: exact(p, t_new)) if exact is not None else None
        report = replace(report, n=state.n + 1, t_n=t_new, l2_error=error)
        state.bound += bound_increment(report)
        report.bound_accumulator = state.bound
        state.history.append(report)
        state.n += 1
        state.t_n = t_new
        state.mesh = step.mesh
        state.u = step.u_new
        self.events.publish(EventType.ACCEPT, state.n, t_new, report.k_n,
                            xi=report.xi_n, eta=report.eta_n, dof=report.dof)
        return state


def _step_to(t: float, k: float, T: float) -> Tuple[float, float]:
    """Truncate k so the last step lands exactly on T; returns (k, t_new)."""
    remaining = T - t
    if k >= remaining * (1.0 - _END_SLACK):
        return remaining, T
    return k, t + k


def initial_state(problem, mesh: Mesh, tol: Tolerances) -> Tuple[AdaptState, float]:
    """Nodal interpolant of the initial data and its squared L2 error."""
    u0 = interpolate(problem.initial, mesh)
    initial_error_sq = l2_error(u0, problem.initial) ** 2
    k0 = min(max(tol.k0, tol.k_min), tol.k_max)
    state = AdaptState(n=0, t_n=0.0, k_n=k0, mesh=mesh, u=u0, bound=initial_error_sq)
    return state, initial_error_sq


OnAccept = Callable[[AdaptState, IndicatorReport], None]


# ----------------------------------------------------------------------
# drivers
# ----------------------------------------------------------------------
def run_algorithm1(problem, mesh: Mesh, tol: Tolerances, cg_rtol: float = 1e-12,
                   events: Optional[EventLog] = None, monitor: Optional[RunMonitor] = None,
                   on_accept: Optional[OnAccept] = None) -> Trajectory:
    """
    Step-size control on a fixed mesh: halve and re-solve on reject,
    grow the next step on a comfortable accept.

    Raises:
        StepUnderflow: k fell below k_min after a rejection
    """
    runner = StepRunner(problem, tol, cg_rtol, monitor, events)
    state, initial_error_sq = initial_state(problem, mesh, tol)
    while state.t_n < tol.T:
        k, t_new = _step_to(state.t_n, state.k_n, tol.T)
        step, report = runner.solve(mesh, state.u, state.t_n, k)
        decision = runner.decide(report)
        while decision is TimeDecision.REJECT:
            k = runner.shrink(state, k)
            k, t_new = _step_to(state.t_n, k, tol.T)
            step, report = runner.solve(mesh, state.u, state.t_n, k)
            decision = runner.decide(report)
        runner.accept(state, step, report, t_new)
        state.k_n = runner.next_step_size(state, decision, k) if t_new < tol.T else k
        if on_accept is not None:
            on_accept(state, state.history[-1])
    return Trajectory(state, runner.events, initial_error_sq)


def run_uniform(problem, mesh: Mesh, tol: Tolerances, cg_rtol: float = 1e-12,
                events: Optional[EventLog] = None, monitor: Optional[RunMonitor] = None,
                on_accept: Optional[OnAccept] = None, k: Optional[float] = None) -> Trajectory:
    """Fixed step k (default k0) on a fixed mesh; indicators are recorded but never acted on."""
    runner = StepRunner(problem, tol, cg_rtol, monitor, events)
    state, initial_error_sq = initial_state(problem, mesh, tol)
    k = tol.k0 if k is None else k
    state.k_n = k
    steps = max(1, int(round(tol.T / k)))
    partial = abs(steps * k - tol.T) > _END_SLACK * tol.T
    if partial:
        steps = int(np.ceil(tol.T / k - _END_SLACK))
    for i in range(steps):
        last = i == steps - 1
        k_step = tol.T - state.t_n if last and partial else k
        t_new = tol.T if last else state.t_n + k
        step, report = runner.solve(mesh, state.u, state.t_n, k_step)
        runner.accept(state, step, report, t_new)
        if on_accept is not None:
            on_accept(state, state.history[-1])
    return Trajectory(state, runner.events, initial_error_sq)


def advance(state: AdaptState, problem, tol: Tolerances, runner: Optional[StepRunner] = None) -> AdaptState:
    """
    One step of the coupled space-time loop:

    1. trial solve on the current mesh
    2. halve k until the time test passes
    3. refine while eta_n > TOL_space/T, re-solving (and re-checking time)
    4. coarsen patches within the zeta budget and re-solve; the coarse solve
       is kept unless it fails the time test
    5. grow k for the next step if the final step allows it

    Raises:
        StepUnderflow: k fell below k_min after a rejection
    """
    runner = runner or StepRunner(problem, tol)
    mesh = state.mesh
    k, t_new = _step_to(state.t_n, state.k_n, tol.T)

    def solve_with_time_control(mesh, k):
        step, report = runner.solve(mesh, state.u, state.t_n, k)
        while runner.decide(report) is TimeDecision.REJECT:
            k = runner.shrink(state, k)
            k, _ = _step_to(state.t_n, k, tol.T)
            step, report = runner.solve(mesh, state.u, state.t_n, k)
        k, t_end = _step_to(state.t_n, k, tol.T)
        return step, report, k, t_end

    step, report, k, t_new = solve_with_time_control(mesh, k)

    space_limit = tol.tol_space / tol.T
    loops = 0
    while report.eta_n > space_limit:
        if loops >= tol.max_refine_loops:
            state.counters.refine_cap_hits += 1
            runner.events.publish(EventType.REFINE_CAP, state.n + 1, state.t_n, k,
                                  eta=report.eta_n, limit=space_limit)
            logger.warning("refinement cap of %d loops reached at t=%.6g (eta=%.3e > %.3e)",
                           tol.max_refine_loops, state.t_n, report.eta_n, space_limit)
            break
        marked = mark_refine(report.eta_elements, tol)
        with runner.monitor.timer("adapt"):
            mesh = refine(mesh, marked)
        loops += 1
        state.counters.refines += 1
        runner.events.publish(EventType.REFINE, state.n + 1, state.t_n, k,
                              marked=len(marked), elements=mesh.num_elements)
        step, report, k, t_new = solve_with_time_control(mesh, k)

    with runner.monitor.timer("adapt"):
        candidate = coarsen(mesh, range(mesh.num_elements))
    if candidate.num_vertices < mesh.num_vertices:
        patches = removed_vertex_patches(mesh, candidate)
        zeta, _ = compute_zeta(step.u_new, candidate, k, problem.epsilon, patches)
        chosen = sorted(mark_coarsen(zeta, tol, tol.T, len(patches)))
        if chosen:
            elements = [e for i in chosen for e in patches[i][1]]
            with runner.monitor.timer("adapt"):
                coarse = coarsen(mesh, elements)
            coarse_step, coarse_report = runner.solve(coarse, state.u, state.t_n, k)
            # the zeta budget covers the space error added here; only time is re-checked
            if runner.decide(coarse_report) is not TimeDecision.REJECT:
                coarse_report.zeta_patches = zeta[chosen]
                coarse_report.zeta_total = float(zeta[chosen].sum())
                state.counters.coarsens += 1
                runner.events.publish(EventType.COARSEN, state.n + 1, state.t_n, k,
                                      patches=len(chosen), elements=coarse.num_elements,
                                      zeta=coarse_report.zeta_total)
                mesh, step, report = coarse, coarse_step, coarse_report
            else:
                state.counters.coarsen_reverts += 1
                logger.info("coarsening at t=%.6g undone: re-solved step fails the time test", state.t_n)

    decision = runner.decide(report)
    runner.accept(state, step, report, t_new)
    state.k_n = runner.next_step_size(state, decision, k) if t_new < tol.T else k
    return state


def run_algorithm2(problem, mesh: Mesh, tol: Tolerances, cg_rtol: float = 1e-12,
                   events: Optional[EventLog] = None, monitor: Optional[RunMonitor] = None,
                   on_accept: Optional[OnAccept] = None) -> Trajectory:
    """Coupled space-time adaptive run from t=0 to T."""
    runner = StepRunner(problem, tol, cg_rtol, monitor, events)
    state, initial_error_sq = initial_state(problem, mesh, tol)
    while state.t_n < tol.T:
        advance(state, problem, tol, runner)
        if on_accept is not None:
            on_accept(state, state.history[-1])
    return Trajectory(state, runner.events, initial_error_sq)
