#!/usr/bin/env python3
"""
Characteristics - Backward tracing of characteristic feet

Features:
- Velocity fields with analytic or finite-difference gradients
- Implicit mid-point foot tracing with extrapolated velocity
- Explicit mid-point rule for comparison diagnostics
- Flow-map Jacobian determinant by central differences
- Volume-preserving 3D tracing by splitting into two planar
  divergence-free fields (Strang or Lie composition)
- Fine-step RK4 reference integrator
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import GradientUnavailable, NoConvergence

logger = logging.getLogger(__name__)

FIXED_POINT_TOL = 1e-12
MAX_ITERATIONS = 50
FD_STEP = 1e-6
GAUSS_ORDER = 8

Evaluate = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True, eq=False)
class VelocityField:
    """
    Time-dependent velocity b(x, t).

    evaluate maps points (n, d) and a time to velocities (n, d);
    gradient, if given, returns (n, d, d) with [i, j] = d b_i / d x_j.
    """
    dimension: int
    evaluate: Evaluate
    gradient: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    divergence_free: bool = True
    name: str = "velocity"

    def __call__(self, points, t: float) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        values = np.asarray(self.evaluate(points, t), dtype=float)
        return np.broadcast_to(values, points.shape).copy()

    def jacobian(self, points, t: float, allow_fd: bool = True) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        if self.gradient is not None:
            return np.asarray(self.gradient(points, t), dtype=float).reshape(-1, self.dimension, self.dimension)
        if not allow_fd:
            raise GradientUnavailable(self.name)
        return _fd_jacobian(lambda p: self(p, t), points)

    def divergence(self, points, t: float) -> np.ndarray:
        return np.trace(self.jacobian(points, t), axis1=1, axis2=2)


@dataclass
class TraceResult:
    """Feet of the characteristics through the query points."""
    feet: np.ndarray
    iterations: np.ndarray
    clamped_count: int = 0


def _fd_jacobian(func: Callable[[np.ndarray], np.ndarray], points: np.ndarray) -> np.ndarray:
    n, d = points.shape
    step = FD_STEP * np.maximum(1.0, np.linalg.norm(points, axis=1))
    jac = np.empty((n, d, d))
    for j in range(d):
        shift = np.zeros_like(points)
        shift[:, j] = step
        jac[:, :, j] = (func(points + shift) - func(points - shift)) / (2.0 * step[:, None])
    return jac


def check_divergence_free(field: VelocityField, points, t: float = 0.0, tol: float = 1e-8) -> bool:
    """True when |div b| <= tol at every sample point."""
    return bool(np.max(np.abs(field.divergence(points, t))) <= tol)


# ----------------------------------------------------------------------
# field factories
# ----------------------------------------------------------------------
def zero_field(dimension: int) -> VelocityField:
    return VelocityField(
        dimension,
        lambda x, t: np.zeros_like(x),
        lambda x, t: np.zeros((len(x), dimension, dimension)),
        name="zero",
    )


def constant_field(velocity: Sequence[float]) -> VelocityField:
    velocity = np.asarray(velocity, dtype=float).reshape(-1)
    d = len(velocity)
    return VelocityField(
        d,
        lambda x, t: np.tile(velocity, (len(x), 1)),
        lambda x, t: np.zeros((len(x), d, d)),
        name="constant",
    )


def _linear_field(matrix, name: str) -> VelocityField:
    matrix = np.asarray(matrix, dtype=float)
    d = len(matrix)
    return VelocityField(
        d,
        lambda x, t: x @ matrix.T,
        lambda x, t: np.tile(matrix, (len(x), 1, 1)),
        name=name,
    )


def rotation_field() -> VelocityField:
    """b = (y, -x): clockwise rigid rotation."""
    return _linear_field([[0.0, 1.0], [-1.0, 0.0]], "rotation")


def shear_field(rate: float = 1.0) -> VelocityField:
    """b = (rate * y, 0)."""
    return _linear_field([[0.0, rate], [0.0, 0.0]], "shear")


def stream_function_field() -> VelocityField:
    """Cellular flow from psi = sin(pi x) sin(pi y): b = (psi_y, -psi_x)."""
    pi = np.pi

    def evaluate(x, t):
        sx, cx = np.sin(pi * x[:, 0]), np.cos(pi * x[:, 0])
        sy, cy = np.sin(pi * x[:, 1]), np.cos(pi * x[:, 1])
        return np.stack([pi * sx * cy, -pi * cx * sy], axis=1)

    def gradient(x, t):
        sx, cx = np.sin(pi * x[:, 0]), np.cos(pi * x[:, 0])
        sy, cy = np.sin(pi * x[:, 1]), np.cos(pi * x[:, 1])
        jac = np.empty((len(x), 2, 2))
        jac[:, 0, 0] = pi ** 2 * cx * cy
        jac[:, 0, 1] = -pi ** 2 * sx * sy
        jac[:, 1, 0] = pi ** 2 * sx * sy
        jac[:, 1, 1] = -pi ** 2 * cx * cy
        return jac

    return VelocityField(2, evaluate, gradient, name="stream")


def abc_field(a: float = 1.0, b: float = 0.7, c: float = 0.43) -> VelocityField:
    """Arnold-Beltrami-Childress flow (divergence free, d b1/d y1 = 0)."""

    def evaluate(x, t):
        y1, y2, y3 = x[:, 0], x[:, 1], x[:, 2]
        return np.stack([
            a * np.sin(y3) + c * np.cos(y2),
            b * np.sin(y1) + a * np.cos(y3),
            c * np.sin(y2) + b * np.cos(y1),
        ], axis=1)

    def gradient(x, t):
        y1, y2, y3 = x[:, 0], x[:, 1], x[:, 2]
        jac = np.zeros((len(x), 3, 3))
        jac[:, 0, 1] = -c * np.sin(y2)
        jac[:, 0, 2] = a * np.cos(y3)
        jac[:, 1, 0] = b * np.cos(y1)
        jac[:, 1, 2] = -a * np.sin(y3)
        jac[:, 2, 0] = -b * np.sin(y1)
        jac[:, 2, 1] = c * np.cos(y2)
        return jac

    return VelocityField(3, evaluate, gradient, name="abc")


# ----------------------------------------------------------------------
# 2D / 1D mid-point tracing
# ----------------------------------------------------------------------
def extrapolated_velocity(field: VelocityField, t: float, k: float,
                          t_start: Optional[float] = None) -> Callable[[np.ndarray], np.ndarray]:
    """z -> 3/2 b(z, t-k) - 1/2 b(z, t-2k); b(z, t-k) alone when t-2k precedes t_start."""
    s1, s2 = t - k, t - 2.0 * k
    if t_start is not None and s2 < t_start - 1e-14 * max(1.0, abs(t_start)):
        return lambda z: field(z, s1)
    return lambda z: 1.5 * field(z, s1) - 0.5 * field(z, s2)


def midpoint_solve(velocity: Callable[[np.ndarray], np.ndarray], points: np.ndarray, k: float,
                   tol: float = FIXED_POINT_TOL, max_iter: int = MAX_ITERATIONS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve y = x - k v((x + y) / 2) by fixed-point iteration.

    The whole batch is iterated until every point has converged, so the
    iteration count is shared and the map x -> y stays smooth.

    Returns:
        feet (n, d), iteration at which each point first converged (n,)
    """
    x = np.asarray(points, dtype=float)
    y = x - k * velocity(x)
    scale = tol * np.maximum(1.0, np.linalg.norm(x, axis=1))
    first = np.full(len(x), max_iter, dtype=np.int64)
    converged = np.zeros(len(x), dtype=bool)
    update = np.zeros(len(x))
    for iteration in range(1, max_iter + 1):
        y_next = x - k * velocity(0.5 * (x + y))
        update = np.linalg.norm(y_next - y, axis=1)
        y = y_next
        newly = ~converged & (update <= scale)
        first[newly] = iteration
        converged |= newly
        if converged.all():
            return y, first
    raise NoConvergence(max_iter, float(update[~converged].max()))


def explicit_midpoint(velocity: Callable[[np.ndarray], np.ndarray], points: np.ndarray, k: float) -> np.ndarray:
    """y = x - k v(x - k/2 v(x)); not volume preserving (det defect O(k^3))."""
    x = np.asarray(points, dtype=float)
    return x - k * velocity(x - 0.5 * k * velocity(x))


def clamp_to_box(points: np.ndarray, lower, upper) -> Tuple[np.ndarray, int]:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    outside = np.any((points < lower) | (points > upper), axis=1)
    return np.clip(points, lower, upper), int(outside.sum())


def trace_feet(field: VelocityField, points, t: float, k: float,
               domain: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
               t_start: Optional[float] = None, scheme: str = "midpoint",
               tol: float = FIXED_POINT_TOL, max_iter: int = MAX_ITERATIONS) -> TraceResult:
    """
    Trace feet x(t - k) of the characteristics ending at points at time t.

    Args:
        domain: (lower, upper) box; feet outside are projected back and counted
        t_start: initial time; steps reaching before it use b(., t-k) only
        scheme: "midpoint" (implicit, volume preserving) or "explicit-midpoint"

    Raises:
        NoConvergence: fixed point fails within max_iter iterations
    """
    if not k > 0:
        raise ValueError(f"step size must be positive, got {k!r}")
    points = np.asarray(points, dtype=float).reshape(-1, field.dimension)
    velocity = extrapolated_velocity(field, t, k, t_start)
    if scheme == "midpoint":
        feet, iterations = midpoint_solve(velocity, points, k, tol, max_iter)
    elif scheme == "explicit-midpoint":
        feet, iterations = explicit_midpoint(velocity, points, k), np.zeros(len(points), dtype=np.int64)
    else:
        raise ValueError(f"unknown tracing scheme '{scheme}'")

    clamped = 0
    if domain is not None:
        feet, clamped = clamp_to_box(feet, *domain)
        if clamped:
            logger.debug("%d characteristic feet left the domain and were clamped", clamped)
    return TraceResult(feet, iterations, clamped)


def flow_jacobian_det(field: VelocityField, x, t: float, k: float, scheme: str = "midpoint",
                      composition: str = "strang", t_start: Optional[float] = None) -> float:
    """
    det(dy/dx) of the discrete backward flow map by central differences,
    stencil spacing 1e-6 * max(1, |x|).
    """
    x = np.asarray(x, dtype=float).reshape(field.dimension)
    d = field.dimension
    delta = FD_STEP * max(1.0, float(np.linalg.norm(x)))
    stencil = np.repeat(x[None, :], 2 * d, axis=0)
    for j in range(d):
        stencil[2 * j, j] += delta
        stencil[2 * j + 1, j] -= delta
    if d == 3:
        feet, _ = _trace_3d(field, stencil, t, k, composition, anchor=np.full(2 * d, x[1]), t_start=t_start)
    else:
        feet = trace_feet(field, stencil, t, k, t_start=t_start, scheme=scheme).feet
    jac = np.stack([(feet[2 * j] - feet[2 * j + 1]) / (2.0 * delta) for j in range(d)], axis=1)
    return float(np.linalg.det(jac))


# ----------------------------------------------------------------------
# 3D volume-preserving composition
# ----------------------------------------------------------------------
def _d1_b1(field: VelocityField, points: np.ndarray, t: float, allow_fd: bool) -> np.ndarray:
    if field.gradient is not None:
        return field.jacobian(points, t)[:, 0, 0]
    if not allow_fd:
        raise GradientUnavailable(field.name)
    step = FD_STEP * np.maximum(1.0, np.linalg.norm(points, axis=1))
    shift = np.zeros_like(points)
    shift[:, 0] = step
    return (field(points + shift, t)[:, 0] - field(points - shift, t)[:, 0]) / (2.0 * step)


def _line_integral(field: VelocityField, points: np.ndarray, anchor: np.ndarray, t: float,
                   allow_fd: bool) -> np.ndarray:
    """G(y) = integral from y2 to anchor of d b1/d y1 (y1, w, y3) dw, composite Gauss-Legendre."""
    length = anchor - points[:, 1]
    panels = max(1, int(np.ceil(np.max(np.abs(length))))) if len(points) else 1
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_ORDER)
    # nodes on [0, 1] for every panel
    u = ((np.arange(panels)[:, None] + 0.5 * (nodes[None, :] + 1.0)) / panels).reshape(-1)
    w = np.tile(0.5 * weights / panels, panels)
    n, q = len(points), len(u)
    samples = np.repeat(points, q, axis=0)
    samples[:, 1] = (points[:, 1][:, None] + length[:, None] * u[None, :]).reshape(-1)
    values = _d1_b1(field, samples, t, allow_fd).reshape(n, q)
    return length * (values @ w)


def _weyl_parts(field: VelocityField, anchor2, allow_fd: bool) -> Tuple[VelocityField, VelocityField]:
    """anchor2 is a scalar or one second coordinate per evaluated point."""
    anchor2 = np.asarray(anchor2, dtype=float)

    def line_integral(points, t):
        return _line_integral(field, points, np.broadcast_to(anchor2, (len(points),)), t, allow_fd)

    def first(points, t):
        b = field(points, t)
        g = line_integral(points, t)
        return np.stack([np.zeros(len(points)), b[:, 1] - g, b[:, 2]], axis=1)

    def second(points, t):
        b = field(points, t)
        g = line_integral(points, t)
        return np.stack([b[:, 0], g, np.zeros(len(points))], axis=1)

    return (VelocityField(3, first, name=f"{field.name}-part1"),
            VelocityField(3, second, name=f"{field.name}-part2"))


def decompose_weyl_3d(field: VelocityField, anchor, allow_fd: bool = True) -> Tuple[VelocityField, VelocityField]:
    """
    Split a divergence-free 3D field into two divergence-free parts,
    b1 = (0, b2 - G, b3) and b2 = (b1, G, 0), with G integrated up to the
    anchor's second coordinate.

    Raises:
        GradientUnavailable: no gradient and allow_fd is False
    """
    if field.dimension != 3:
        raise ValueError("Weyl decomposition needs a 3D field")
    if field.gradient is None and not allow_fd:
        raise GradientUnavailable(field.name)
    anchor = np.asarray(anchor, dtype=float).reshape(3)
    return _weyl_parts(field, anchor[1], allow_fd)


def _trace_3d(field: VelocityField, points: np.ndarray, t: float, k: float, composition: str,
              anchor: Optional[np.ndarray] = None, t_start: Optional[float] = None,
              allow_fd: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if field.gradient is None and not allow_fd:
        raise GradientUnavailable(field.name)
    anchor = points[:, 1].copy() if anchor is None else np.asarray(anchor, dtype=float)
    part1, part2 = _weyl_parts(field, anchor, allow_fd)
    v1 = extrapolated_velocity(part1, t, k, t_start)
    v2 = extrapolated_velocity(part2, t, k, t_start)
    if composition == "strang":
        plan = [(v1, 0.5 * k), (v2, k), (v1, 0.5 * k)]
    elif composition == "lie":
        plan = [(v1, k), (v2, k)]
    else:
        raise ValueError(f"unknown composition '{composition}'")
    y = points
    iterations = np.zeros(len(points), dtype=np.int64)
    for velocity, h in plan:
        y, its = midpoint_solve(velocity, y, h)
        iterations += its
    return y, iterations


def trace_3d_volume_preserving(field: VelocityField, x, t: float, k: float,
                               composition: str = "strang", t_start: Optional[float] = None,
                               allow_fd: bool = True) -> np.ndarray:
    """
    Volume-preserving backward step for a 3D divergence-free field.

    Each planar part is advanced with the implicit mid-point rule; the
    decomposition anchor is the starting point and stays fixed for the step.
    """
    x = np.asarray(x, dtype=float)
    feet, _ = _trace_3d(field, x.reshape(-1, 3), t, k, composition, t_start=t_start, allow_fd=allow_fd)
    return feet.reshape(x.shape)


def rk4_reference(field: VelocityField, points, t: float, k: float, substeps: int = 1000) -> np.ndarray:
    """Integrate dy/ds = b(y, s) backward from s = t to s = t - k with classical RK4."""
    y = np.asarray(points, dtype=float).reshape(-1, field.dimension).copy()
    h = -k / substeps
    s = t
    for _ in range(substeps):
        k1 = field(y, s)
        k2 = field(y + 0.5 * h * k1, s + 0.5 * h)
        k3 = field(y + 0.5 * h * k2, s + 0.5 * h)
        k4 = field(y + h * k3, s + h)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s += h
    return y


# ----------------------------------------------------------------------
# diagnostics
# ----------------------------------------------------------------------
@dataclass
class TraceDiagnostic:
    k: float
    max_det_defect: float
    mean_iterations: float
    clamped_count: int

    def csv_row(self) -> List:
        return [self.k, self.max_det_defect, self.mean_iterations, self.clamped_count]


TRACE_CSV_COLUMNS = ("k", "max_det_defect", "mean_iterations", "clamped_count")


def trace_diagnostics(field: VelocityField, points, k_values: Sequence[float], t: float = 0.0,
                      scheme: str = "midpoint", composition: str = "strang",
                      domain: Optional[Tuple[Sequence[float], Sequence[float]]] = None) -> List[TraceDiagnostic]:
    """Jacobian-determinant defect and iteration statistics over a list of step sizes."""
    points = np.asarray(points, dtype=float).reshape(-1, field.dimension)
    rows = []
    for k in k_values:
        if field.dimension == 3:
            _, iterations = _trace_3d(field, points, t, k, composition)
            clamped = 0
        else:
            result = trace_feet(field, points, t, k, domain=domain, scheme=scheme)
            iterations, clamped = result.iterations, result.clamped_count
        defects = [abs(flow_jacobian_det(field, p, t, k, scheme=scheme, composition=composition) - 1.0)
                   for p in points]
        rows.append(TraceDiagnostic(float(k), float(max(defects)), float(np.mean(iterations)), clamped))
        logger.info("trace k=%g: max |det-1| = %.3e", k, rows[-1].max_det_defect)
    return rows
