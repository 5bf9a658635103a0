#!/usr/bin/env python3
"""
Runner - Executes a run configuration and writes its artifacts

Features:
- Dispatch on mode: adaptive, uniform, algorithm1-only, convergence,
  trace-diagnostics
- steps.csv written row by row as steps are accepted
- Snapshots every m accepted steps (VTK in 2D, text in 1D)
- events.log, summary.txt and the resolved config.yaml
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .adaptivity import AdaptState, Trajectory, initial_state, run_algorithm1, run_algorithm2, run_uniform
from .benchmarks import STUDY_CSV_COLUMNS, BenchmarkProblem, ConvergenceStudy, convergence_study, make_benchmark
from .characteristics import (TRACE_CSV_COLUMNS, TraceDiagnostic, VelocityField, abc_field, rotation_field,
                              shear_field, stream_function_field, trace_diagnostics)
from .config import RunConfig, export_config
from .estimators import STEP_CSV_COLUMNS, IndicatorReport
from .events import EventLog
from .export import CsvLog, write_csv, write_snapshot
from .monitor import RunMonitor

logger = logging.getLogger(__name__)

DRIVERS = {
    "adaptive": run_algorithm2,
    "uniform": run_uniform,
    "algorithm1-only": run_algorithm1,
}


@dataclass
class RunResult:
    """What a run produced."""
    mode: str
    output_dir: Path
    summary: Dict[str, Any] = field(default_factory=dict)
    trajectory: Optional[Trajectory] = None
    study: Optional[ConvergenceStudy] = None
    diagnostics: List[TraceDiagnostic] = field(default_factory=list)
    artifacts: List[Path] = field(default_factory=list)


def build_problem(config: RunConfig) -> BenchmarkProblem:
    return make_benchmark(config.benchmark, **config.params.overrides())


def _fields(problem: BenchmarkProblem, state: AdaptState) -> Dict[str, np.ndarray]:
    fields = {"u": state.u.coefficients}
    if problem.exact is not None:
        fields["exact"] = np.asarray(problem.exact(state.mesh.vertices, state.t_n), dtype=float)
    return fields


def _write_summary(path: Path, summary: Dict[str, Any]) -> Path:
    with open(path, "w") as f:
        for key, value in summary.items():
            if isinstance(value, dict):
                f.write(f"{key}:\n")
                for inner_key, inner_value in value.items():
                    f.write(f"  {inner_key}: {inner_value}\n")
            else:
                f.write(f"{key}: {value}\n")
    return path


def run_time_stepping(config: RunConfig, problem: BenchmarkProblem, out: Path,
                      monitor: RunMonitor) -> RunResult:
    """Adaptive, uniform or step-size-only run with per-step logging."""
    tol = config.tolerances
    mesh = problem.initial_mesh(config.resolution)
    events = EventLog()
    result = RunResult(config.mode, out)
    snapshots: List[Path] = []
    last_snapshot = [-1]

    def snapshot(state: AdaptState):
        snapshots.append(write_snapshot(out, state.n, state.mesh, _fields(problem, state)))
        last_snapshot[0] = state.n

    with CsvLog(out / "steps.csv", STEP_CSV_COLUMNS) as steps:
        def on_accept(state: AdaptState, report: IndicatorReport):
            steps.write(report.csv_row())
            if config.snapshot_every and state.n % config.snapshot_every == 0:
                snapshot(state)
            logger.info("step %d: t=%.6g k=%.3e xi=%.3e eta=%.3e dof=%d",
                        report.n, report.t_n, report.k_n, report.xi_n, report.eta_n, report.dof)

        if config.snapshot_every:
            snapshot(initial_state(problem, mesh, tol)[0])
        driver = DRIVERS[config.mode]
        trajectory = driver(problem, mesh, tol, cg_rtol=config.cg_rtol, events=events,
                            monitor=monitor, on_accept=on_accept)

    state = trajectory.state
    if config.snapshot_every and last_snapshot[0] != state.n:
        snapshot(state)

    counters = trajectory.counters
    result.trajectory = trajectory
    result.summary = {
        "benchmark": problem.name,
        "mode": config.mode,
        "epsilon": problem.epsilon,
        "final_time": state.t_n,
        "total_steps": trajectory.accepted_steps,
        "total_dof_steps": trajectory.dof_steps,
        "final_dof": state.mesh.num_vertices,
        "final_error": trajectory.final_error,
        "max_error": trajectory.max_error,
        "bound": state.bound,
        "rejects": counters.rejects,
        "refines": counters.refines,
        "coarsens": counters.coarsens,
        "grows": counters.grows,
        "refine_cap_hits": counters.refine_cap_hits,
        "coarsen_reverts": counters.coarsen_reverts,
        "solves": int(monitor.counters.get("solves", 0)),
        "clamped_feet": int(monitor.counters.get("clamped_feet", 0)),
    }
    if result.summary["clamped_feet"]:
        logger.info("%d characteristic feet were clamped into the domain over the run",
                    result.summary["clamped_feet"])
    events.write(out / "events.log")
    result.artifacts += [out / "steps.csv", out / "events.log", *snapshots]
    return result


def run_study(config: RunConfig, problem: BenchmarkProblem, out: Path) -> RunResult:
    study = convergence_study(problem, config.k_values, config.resolution, T=config.tolerances.T,
                              cg_rtol=config.cg_rtol)
    path = write_csv(out / "study.csv", STUDY_CSV_COLUMNS, (row.csv_row() for row in study.rows))
    result = RunResult(config.mode, out, study=study, artifacts=[path])
    result.summary = {
        "benchmark": problem.name,
        "mode": config.mode,
        "epsilon": problem.epsilon,
        "final_time": config.tolerances.T,
        "flux_norm": study.flux_norm,
        "orders": ", ".join(f"{order:.3f}" for order in study.orders),
        "bound_holds": study.bound_holds,
        "spatial_fraction": study.spatial_fraction,
    }
    return result


def trace_setup(config: RunConfig) -> Tuple[VelocityField, np.ndarray, Optional[tuple]]:
    """Field, sample points and clamping box for trace diagnostics."""
    name = config.trace_field
    if name == "abc":
        rng = np.random.default_rng(0)
        return abc_field(), rng.uniform(0.0, 2.0 * np.pi, size=(8, 3)), None
    xs = np.linspace(0.1, 0.9, 5)
    X, Y = np.meshgrid(xs, xs)
    points = np.stack([X.ravel(), Y.ravel()], axis=1)
    if name == "stream":
        return stream_function_field(), points, ((0.0, 0.0), (1.0, 1.0))
    if name == "rotation":
        return rotation_field(), points, None
    return shear_field(), points, None


def run_trace(config: RunConfig, out: Path) -> RunResult:
    velocity, points, domain = trace_setup(config)
    rows = trace_diagnostics(velocity, points, config.k_values, scheme=config.trace_scheme,
                             composition=config.composition, domain=domain)
    path = write_csv(out / "trace.csv", TRACE_CSV_COLUMNS, (row.csv_row() for row in rows))
    result = RunResult(config.mode, out, diagnostics=rows, artifacts=[path])
    result.summary = {
        "field": velocity.name,
        "mode": config.mode,
        "scheme": config.trace_scheme if velocity.dimension < 3 else config.composition,
        "max_det_defect": max(row.max_det_defect for row in rows),
    }
    return result


def run(config: RunConfig, monitor: Optional[RunMonitor] = None) -> RunResult:
    """
    Execute a configuration and write all artifacts into config.output_dir.

    Raises:
        StepUnderflow, SolverDiverged, NoConvergence: numerical failure
    """
    monitor = monitor or RunMonitor()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_config(config, out / "config.yaml")
    logger.info("running %s (%s) into %s", config.benchmark, config.mode, out)

    if config.mode == "trace-diagnostics":
        result = run_trace(config, out)
    elif config.mode == "convergence":
        result = run_study(config, build_problem(config), out)
    else:
        result = run_time_stepping(config, build_problem(config), out, monitor)

    result.summary["wall_seconds"] = round(monitor.elapsed, 3)
    memory = monitor.memory_mb()
    if memory is not None:
        result.summary["memory_mb"] = round(memory, 1)
    phases = monitor.summary()
    if phases:
        result.summary["phases"] = {
            phase: f"{stats['total_seconds']:.3f}s over {stats['count']} calls"
            for phase, stats in phases.items()
        }
    result.artifacts += [_write_summary(out / "summary.txt", result.summary), out / "config.yaml"]
    return result
