#!/usr/bin/env python3
"""
Benchmarks - Exact-solution test problems and convergence studies

Features:
- Travelling Gaussian peak (1D) and rotating Gaussian cone (2D)
- Moving shock fronts in 1D and 2D with overflow-free erfc evaluation
- Heat-equation problem for temporal order checks
- Registry of problem constructors with parameter overrides
- Fixed-step convergence study against the a priori bound
"""

import inspect
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .adaptivity import run_uniform
from .characteristics import VelocityField, constant_field, rotation_field, zero_field
from .config import Tolerances
from .mesh import Mesh, box_mesh, refine

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]
SpaceTimeFunction = Callable[[np.ndarray, float], np.ndarray]

STUDY_CSV_COLUMNS = ("k", "error", "order", "bound")


def erfc(x):
    """Complementary error function."""
    return special.erfc(x)


def erfcx(x):
    """Scaled complementary error function exp(x^2) erfc(x)."""
    return special.erfcx(x)


@dataclass(frozen=True, eq=False)
class BenchmarkProblem:
    """A convection-diffusion problem with a known solution."""
    name: str
    dimension: int
    domain: Tuple[Tuple[float, ...], Tuple[float, ...]]
    epsilon: float
    velocity: VelocityField
    initial: PointFunction
    exact: SpaceTimeFunction
    boundary: SpaceTimeFunction
    source: Optional[SpaceTimeFunction] = None
    params: Dict[str, float] = field(default_factory=dict)
    final_time: float = 1.0
    initial_laplacian: Optional[float] = None

    def initial_mesh(self, resolution: int) -> Mesh:
        lower, upper = self.domain
        return box_mesh(lower, upper, resolution)

    @property
    def flux_norm(self) -> Optional[float]:
        """eps * ||Laplacian u0||, None for non-smooth initial data."""
        if self.initial_laplacian is None:
            return None
        return self.epsilon * self.initial_laplacian


def _points(x, dimension: int) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1, dimension)


def _zero_boundary(x, t):
    return np.zeros(len(x))


def _check_positive(**values):
    for name, value in values.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value!r}")


# ----------------------------------------------------------------------
# smooth problems
# ----------------------------------------------------------------------
def peak_1d(epsilon: float = 0.01, lam: float = 0.1, x0: float = 0.0, b: float = 1.0) -> BenchmarkProblem:
    """Gaussian of width lam travelling with speed b on [-1, 2]."""
    _check_positive(epsilon=epsilon, lam=lam)

    def exact(x, t):
        x = _points(x, 1)[:, 0]
        spread = lam ** 2 + 2.0 * epsilon * t
        return lam / np.sqrt(spread) * np.exp(-(x - x0 - b * t) ** 2 / (2.0 * spread))

    return BenchmarkProblem(
        name="peak_1d",
        dimension=1,
        domain=((-1.0,), (2.0,)),
        epsilon=epsilon,
        velocity=constant_field([b]),
        initial=lambda x: exact(x, 0.0),
        exact=exact,
        boundary=_zero_boundary,
        params={"lam": lam, "x0": x0, "b": b},
        initial_laplacian=float(np.sqrt(0.75 * np.sqrt(np.pi)) * lam ** -1.5),
    )


def cone_2d(epsilon: float = 1e-4, lam: float = 0.125, x0: float = -0.5, y0: float = 0.0) -> BenchmarkProblem:
    """Gaussian cone carried around the origin by b = (y, -x) on [-1, 1]^2."""
    _check_positive(epsilon=epsilon, lam=lam)

    def exact(x, t):
        x = _points(x, 2)
        c, s = np.cos(t), np.sin(t)
        xh = x[:, 0] - x0 * c - y0 * s
        yh = x[:, 1] + x0 * s - y0 * c
        spread = lam ** 2 + 2.0 * epsilon * t
        return lam ** 2 / spread * np.exp(-(xh ** 2 + yh ** 2) / (2.0 * spread))

    return BenchmarkProblem(
        name="cone_2d",
        dimension=2,
        domain=((-1.0, -1.0), (1.0, 1.0)),
        epsilon=epsilon,
        velocity=rotation_field(),
        initial=lambda x: exact(x, 0.0),
        exact=exact,
        boundary=exact,
        params={"lam": lam, "x0": x0, "y0": y0},
        final_time=float(np.pi),
        initial_laplacian=float(np.sqrt(2.0 * np.pi) / lam),
    )


def heat_1d(epsilon: float = 1.0) -> BenchmarkProblem:
    """u0 = sin(pi x) on [0, 1] with no convection; decays like exp(-eps pi^2 t)."""
    _check_positive(epsilon=epsilon)

    def exact(x, t):
        x = _points(x, 1)[:, 0]
        return np.exp(-epsilon * np.pi ** 2 * t) * np.sin(np.pi * x)

    return BenchmarkProblem(
        name="heat_1d",
        dimension=1,
        domain=((0.0,), (1.0,)),
        epsilon=epsilon,
        velocity=zero_field(1),
        initial=lambda x: exact(x, 0.0),
        exact=exact,
        boundary=_zero_boundary,
        final_time=0.1,
        initial_laplacian=float(np.pi ** 2 / np.sqrt(2.0)),
    )


# ----------------------------------------------------------------------
# shock problems
# ----------------------------------------------------------------------
def shock_factor(s, t: float, epsilon: float, b: float = 1.0) -> np.ndarray:
    """
    erfc((s - bt)/r) + exp(bs/eps) erfc((s + bt)/r) with r = 2 sqrt(eps t).

    The second term is formed as erfcx(z) exp(-(s - bt)^2 / (4 eps t))
    wherever z = (s + bt)/r >= 0, so exp(bs/eps) is never built. At t = 0
    it is the step 2 for s <= 0, 0 otherwise.
    """
    shape = np.shape(s)
    s = np.atleast_1d(np.asarray(s, dtype=float)).ravel()
    if t <= 0:
        return np.where(s <= 0, 2.0, 0.0).reshape(shape)
    root = 2.0 * np.sqrt(epsilon * t)
    z = (s + b * t) / root
    second = np.empty_like(s)
    ahead = z >= 0
    second[ahead] = erfcx(z[ahead]) * np.exp(-(s[ahead] - b * t) ** 2 / (4.0 * epsilon * t))
    behind = ~ahead
    second[behind] = np.exp(b * s[behind] / epsilon) * erfc(z[behind])
    return (erfc((s - b * t) / root) + second).reshape(shape)


def naive_shock_profile(s, t: float, epsilon: float, b: float = 1.0) -> np.ndarray:
    """The unstabilized formula; overflows to inf or nan for small eps."""
    s = np.asarray(s, dtype=float)
    root = 2.0 * np.sqrt(epsilon * t)
    with np.errstate(over="ignore", invalid="ignore"):
        return 0.5 * (erfc((s - b * t) / root) + np.exp(b * s / epsilon) * erfc((s + b * t) / root))


def shock_1d(epsilon: float = 1e-6, b: float = 1.0, x0: float = 0.0) -> BenchmarkProblem:
    """Step at x0 carried right with speed b on [0, 2]; u(0) = 1, u(2) = 0."""
    _check_positive(epsilon=epsilon, b=b)

    def exact(x, t):
        x = _points(x, 1)[:, 0]
        return 0.5 * shock_factor(x - x0, t, epsilon, b)

    return BenchmarkProblem(
        name="shock_1d",
        dimension=1,
        domain=((0.0,), (2.0,)),
        epsilon=epsilon,
        velocity=constant_field([b]),
        initial=lambda x: exact(x, 0.0),
        exact=exact,
        boundary=exact,
        params={"b": b, "x0": x0},
    )


def shock1_2d(epsilon: float = 1e-6, b: float = 1.0, x0: float = 0.0) -> BenchmarkProblem:
    """Planar front moving in x with b = (b, 0) on [0, 1]^2."""
    _check_positive(epsilon=epsilon, b=b)

    def exact(x, t):
        x = _points(x, 2)
        return 0.5 * shock_factor(x[:, 0] - x0, t, epsilon, b)

    return BenchmarkProblem(
        name="shock1_2d",
        dimension=2,
        domain=((0.0, 0.0), (1.0, 1.0)),
        epsilon=epsilon,
        velocity=constant_field([b, 0.0]),
        initial=lambda x: exact(x, 0.0),
        exact=exact,
        boundary=exact,
        params={"b": b, "x0": x0},
        final_time=0.5,
    )


def shock2_2d(epsilon: float = 1e-6, b: float = 1.0, x0: float = 0.0, y0: float = 0.0) -> BenchmarkProblem:
    """Corner front moving diagonally with b = (b, b) on [0, 1]^2."""
    _check_positive(epsilon=epsilon, b=b)

    def exact(x, t):
        x = _points(x, 2)
        return 0.25 * shock_factor(x[:, 0] - x0, t, epsilon, b) * shock_factor(x[:, 1] - y0, t, epsilon, b)

    return BenchmarkProblem(
        name="shock2_2d",
        dimension=2,
        domain=((0.0, 0.0), (1.0, 1.0)),
        epsilon=epsilon,
        velocity=constant_field([b, b]),
        initial=lambda x: exact(x, 0.0),
        exact=exact,
        boundary=exact,
        params={"b": b, "x0": x0, "y0": y0},
        final_time=0.5,
    )


BENCHMARKS: Dict[str, Callable[..., BenchmarkProblem]] = {
    "peak_1d": peak_1d,
    "shock_1d": shock_1d,
    "cone_2d": cone_2d,
    "shock1_2d": shock1_2d,
    "shock2_2d": shock2_2d,
    "heat_1d": heat_1d,
}


def make_benchmark(name: str, **overrides: Any) -> BenchmarkProblem:
    """Build a registered problem; overrides it does not take are dropped with a warning."""
    if name not in BENCHMARKS:
        raise KeyError(f"unknown benchmark '{name}'")
    constructor = BENCHMARKS[name]
    accepted = inspect.signature(constructor).parameters
    unused = sorted(set(overrides) - set(accepted))
    if unused:
        logger.warning("%s ignores parameter(s): %s", name, ", ".join(unused))
    return constructor(**{k: v for k, v in overrides.items() if k in accepted})


# ----------------------------------------------------------------------
# convergence study
# ----------------------------------------------------------------------
@dataclass
class StudyRow:
    k: float
    error: float
    order: Optional[float]
    bound: Optional[float]

    def csv_row(self) -> List:
        return [
            repr(float(self.k)), repr(float(self.error)),
            "" if self.order is None else repr(float(self.order)),
            "" if self.bound is None else repr(float(self.bound)),
        ]


@dataclass
class ConvergenceStudy:
    """Rows of a fixed-step study plus the spatial-error check."""
    problem: str
    rows: List[StudyRow]
    flux_norm: Optional[float]
    spatial_fraction: Optional[float] = None

    @property
    def orders(self) -> List[float]:
        return [r.order for r in self.rows if r.order is not None]

    @property
    def bound_holds(self) -> bool:
        return all(r.bound is None or r.error <= r.bound for r in self.rows)


def convergence_study(problem: BenchmarkProblem, k_values: Sequence[float], resolution: int,
                      T: Optional[float] = None, cg_rtol: float = 1e-12,
                      check_spatial: bool = True) -> ConvergenceStudy:
    """
    Fixed-step runs for each k on one mesh; reports the max-in-time L2
    error, the observed order between consecutive k and the a priori
    bound k/2 * eps ||Laplacian u0||.

    With check_spatial the largest k is repeated on a once-refined mesh
    and the relative change of its error is reported as spatial_fraction.
    """
    T = problem.final_time if T is None else T
    mesh = problem.initial_mesh(resolution)
    flux = problem.flux_norm

    def max_error(mesh: Mesh, k: float) -> float:
        tol = Tolerances(T=T, k0=min(k, T), k_min=min(1e-8, k), k_max=max(k, T))
        trajectory = run_uniform(problem, mesh, tol, cg_rtol=cg_rtol, k=k)
        return float(trajectory.max_error)

    rows: List[StudyRow] = []
    for k in k_values:
        error = max_error(mesh, k)
        order = None
        if rows and rows[-1].error > 0 and error > 0:
            order = float(np.log(rows[-1].error / error) / np.log(rows[-1].k / k))
        bound = 0.5 * k * flux if flux is not None else None
        rows.append(StudyRow(float(k), error, order, bound))
        logger.info("%s k=%g: max L2 error %.4e%s", problem.name, k, error,
                    "" if order is None else f", order {order:.2f}")

    spatial_fraction = None
    if check_spatial and rows:
        largest = max(rows, key=lambda r: r.k)
        fine = refine(mesh, range(mesh.num_elements))
        fine_error = max_error(fine, largest.k)
        spatial_fraction = abs(largest.error - fine_error) / max(fine_error, np.finfo(float).tiny)
        if spatial_fraction > 0.1:
            logger.warning("spatial error is %.0f%% of the temporal error at k=%g; refine the mesh",
                           100 * spatial_fraction, largest.k)
    return ConvergenceStudy(problem.name, rows, flux, spatial_fraction)
