"""Quantitative implicit-function machinery.

Norms follow one convention throughout: ``|.|`` is the l^inf norm on vectors
and ``||.||`` the induced l^inf -> l^inf operator norm, so norm balls are the
boxes ``Q(x0, r) = x0 + [-r, r]^n``.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from radonbl.core import config
from radonbl.core.errors import (
    BoundViolationError,
    ContractionBoundError,
    DecayViolationError,
    NewtonNodeFailure,
    NotPositiveDefiniteError,
    NumericalFailure,
    PreconditionError,
    ShapeError,
)
from radonbl.core.linops import as_matrix, det, linf_operator_norm, spd_inverse_sqrt

logger = logging.getLogger(__name__)

VectorMap = Callable[[np.ndarray], np.ndarray]
PairMap = Callable[[np.ndarray, np.ndarray], np.ndarray]

DECAY_SLACK = 1e-9
ZERO_TOL = 1e-10
ORTHONORMAL_TOL = 1e-8
MAX_CONTRACTION_NODES = 4096


def _vector(value, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float)).ravel()
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} has non-finite entries")
    return arr


def central_difference(func: VectorMap, x: np.ndarray, step: float = config.FD_STEP) -> np.ndarray:
    """Jacobian of ``func`` at ``x`` by central differences with step ``step * max(1, |x_i|)``."""
    x = _vector(x, "x")
    cols = []
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        cols.append((_vector(func(x + e), "phi") - _vector(func(x - e), "phi")) / (2 * h))
    return np.column_stack(cols)


@dataclass
class NewtonProblem:
    """Data of the quantitative inverse function iteration x_(j+1) = x_j - R phi(x_j).

    Attributes:
        phi: map R^n -> R^(n-k).
        x0: starting point.
        r: radius of the box Q(x0, r).
        R: n x (n-k) approximate right inverse of D phi.
        c: claimed bound on ||D phi_x R - I|| over the box, in [0, 1).
        C: claimed bound on |D phi_x v| over |v| <= 1, v orthogonal to range(R).
        jac: analytic derivative; central differences when omitted.
    """

    phi: VectorMap
    x0: np.ndarray
    r: float
    R: np.ndarray
    c: float
    C: float = 0.0
    jac: Optional[VectorMap] = None

    def __post_init__(self):
        self.x0 = _vector(self.x0, "x0")
        self.R = as_matrix(self.R, "R")
        if self.R.shape[0] != self.x0.size and self.R.shape[1] == self.x0.size:
            self.R = self.R.T
        codim = self.value(self.x0).size
        if self.R.shape != (self.x0.size, codim):
            raise ShapeError(f"R has shape {self.R.shape}, expected {(self.x0.size, codim)}")
        if self.r <= 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if not 0 <= self.c < 1:
            raise ValueError(f"c must lie in [0, 1), got {self.c}")
        if self.C < 0:
            raise ValueError(f"C must be nonnegative, got {self.C}")

    @property
    def n(self) -> int:
        return self.x0.size

    @property
    def codim(self) -> int:
        return self.R.shape[1]

    @property
    def r_norm(self) -> float:
        return linf_operator_norm(self.R)

    def value(self, x: np.ndarray) -> np.ndarray:
        return _vector(self.phi(np.asarray(x, dtype=float)), "phi")

    def derivative(self, x: np.ndarray) -> np.ndarray:
        if self.jac is not None:
            return as_matrix(self.jac(np.asarray(x, dtype=float)), "jacobian")
        return central_difference(self.phi, x)

    def recentered(self, x0: np.ndarray, r: float) -> "NewtonProblem":
        return NewtonProblem(self.phi, x0, r, self.R, self.c, self.C, self.jac)


@dataclass
class NewtonCertificate:
    """Residual history and distance bound of one solve."""

    residuals: list[float]
    distance: float
    distance_bound: float
    sampled_contraction: Optional[float]
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "residuals": self.residuals,
            "distance": self.distance,
            "distance_bound": self.distance_bound,
            "sampled_contraction": self.sampled_contraction,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass
class FiberMeasureResult:
    """Cell-counted measure of the zero-set graph next to the guaranteed lower bound."""

    measure: float
    guaranteed_bound: float
    nodes: int
    radius: float
    holds: bool
    roots: np.ndarray = field(repr=False, default_factory=lambda: np.zeros((0, 0)))

    def to_dict(self) -> dict:
        return {
            "measure": self.measure,
            "guaranteed_bound": self.guaranteed_bound,
            "nodes": self.nodes,
            "radius": self.radius,
            "holds": self.holds,
        }


def _box_grid(center: np.ndarray, r: float, grid: int) -> np.ndarray:
    axes = [np.linspace(x - r, x + r, grid) if grid > 1 else np.array([x]) for x in center]
    if grid ** center.size > MAX_CONTRACTION_NODES:
        raise ValueError(
            f"{grid}^{center.size} sample nodes exceed {MAX_CONTRACTION_NODES}; lower the grid"
        )
    return np.array(list(itertools.product(*axes)))


def sampled_contraction(p: NewtonProblem, grid: int = config.CONTRACTION_GRID) -> float:
    """max ||D phi_x R - I|| over a grid of ``grid`` nodes per axis on Q(x0, r)."""
    eye = np.eye(p.codim)
    return max(
        linf_operator_norm(p.derivative(x) @ p.R - eye) for x in _box_grid(p.x0, p.r, grid)
    )


def transverse_basis(p: NewtonProblem) -> np.ndarray:
    """Orthonormal basis (columns) of the orthogonal complement of range(R)."""
    return scipy.linalg.null_space(p.R.T)


def sampled_transverse_bound(p: NewtonProblem, grid: int = config.CONTRACTION_GRID) -> float:
    """Grid estimate of sup |D phi_x v| over |v| <= 1 in the complement of range(R).

    Uses ||D phi_x P|| with P the orthogonal projection onto the complement,
    which dominates the restricted supremum.
    """
    v = transverse_basis(p)
    if v.shape[1] == 0:
        return 0.0
    proj = v @ v.T
    return max(linf_operator_norm(p.derivative(x) @ proj) for x in _box_grid(p.x0, p.r, grid))


def _check_start(p: NewtonProblem, fraction: float) -> float:
    start = float(np.max(np.abs(p.value(p.x0))))
    limit = fraction * p.r * (1 - p.c) / p.r_norm
    if not start < limit:
        raise PreconditionError(
            f"|phi(x0)| = {start:.6g} is not below {fraction:g} r ||R||^-1 (1-c) = {limit:.6g}"
        )
    return start


def newton_solve(
    p: NewtonProblem,
    max_iters: int = config.NEWTON_MAX_ITERS,
    tol: float = config.NEWTON_TOL,
    grid: int = config.CONTRACTION_GRID,
    validate: bool = True,
) -> tuple[np.ndarray, NewtonCertificate]:
    """Run x_(j+1) = x_j - R phi(x_j) from x0 and certify the geometric decay.

    Args:
        p: the problem.
        max_iters: iteration budget.
        tol: stop once |phi(x_j)| <= tol.
        grid: nodes per axis for the contraction spot check.
        validate: spot-check the contraction bound c before iterating.

    Returns:
        (root, certificate).

    Raises:
        ContractionBoundError: the sampled contraction exceeds c.
        PreconditionError: |phi(x0)| >= r ||R||^-1 (1-c).
        DecayViolationError: |phi(x_j)| > (c + 1e-9)^j |phi(x0)| for some j.
        BoundViolationError: the root lies farther from x0 than ||R|| (1-c)^-1 |phi(x0)|.
        NumericalFailure: tol not reached within max_iters.
    """
    # pylint: disable=logging-fstring-interpolation
    sampled = None
    if validate:
        sampled = sampled_contraction(p, grid)
        if sampled > p.c + 1e-12:
            raise ContractionBoundError(
                f"sampled ||D phi R - I|| = {sampled:.6g} exceeds c = {p.c:.6g}"
            )
    start = _check_start(p, 1.0)

    x = p.x0.copy()
    residuals = [start]
    converged = start <= tol
    iterations = 0
    while not converged and iterations < max_iters:
        x = x - p.R @ p.value(x)
        iterations += 1
        res = float(np.max(np.abs(p.value(x))))
        residuals.append(res)
        allowed = (p.c + DECAY_SLACK) ** iterations * start + 1e-15
        if res > allowed:
            raise DecayViolationError(
                f"|phi(x_{iterations})| = {res:.6g} exceeds c^j |phi(x0)| = {allowed:.6g}",
                residuals=residuals,
            )
        converged = res <= tol
    if not converged:
        raise NumericalFailure(
            f"residual {residuals[-1]:.3e} above tol {tol:.1e} after {max_iters} steps"
        )

    distance = float(np.max(np.abs(x - p.x0)))
    bound = p.r_norm * start / (1 - p.c)
    if distance > bound * (1 + DECAY_SLACK) + 1e-15:
        raise BoundViolationError(f"|x - x0| = {distance:.6g} exceeds {bound:.6g}")
    logger.debug(f"[Newton] converged in {iterations} steps, residual {residuals[-1]:.3e}")
    return x, NewtonCertificate(
        residuals=residuals,
        distance=distance,
        distance_bound=bound,
        sampled_contraction=sampled,
        iterations=iterations,
        converged=True,
    )


def _parameter_bounds(v: np.ndarray, radius: float) -> list[tuple[float, float]]:
    """Bounding box of {b : |V b| <= radius} via 2k linear programs."""
    k = v.shape[1]
    a_ub = np.vstack([v, -v])
    b_ub = np.full(2 * v.shape[0], radius)
    bounds = []
    for i in range(k):
        objective = np.zeros(k)
        objective[i] = 1.0
        low = scipy.optimize.linprog(
            objective, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * k, method="highs"
        )
        high = scipy.optimize.linprog(
            -objective, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * k, method="highs"
        )
        if low.status != 0 or high.status != 0:
            raise NumericalFailure("parameter region LP failed")
        bounds.append((float(low.x[i]), float(high.x[i])))
    return bounds


def fiber_measure_lower_bound(
    p: NewtonProblem, grid: int, check_grid: int = config.CONTRACTION_GRID
) -> FiberMeasureResult:
    """Cell-count the zero set of phi in Q(x0, r) as a graph over the complement of range(R).

    Every cell center b of the parameter region |V b| <= rho, with
    rho = min(r/2, r (1-c) / (6 C ||R||)), is pushed onto the zero set by a
    Newton solve on Q(x0 + V b, r/2). The counted parameter measure is
    compared with r^k min(1/2, (1-c) / (6 C ||R||))^k.

    Raises:
        PreconditionError: |phi(x0)| >= (r/3) ||R||^-1 (1-c).
        ContractionBoundError: sampled contraction above c or transverse bound above C.
        NewtonNodeFailure: a node's solve failed.
        BoundViolationError: the counted measure is below the guarantee.
    """
    # pylint: disable=logging-fstring-interpolation
    if grid < 1:
        raise ValueError(f"grid must be positive, got {grid}")
    sampled = sampled_contraction(p, check_grid)
    if sampled > p.c + 1e-12:
        raise ContractionBoundError(
            f"sampled ||D phi R - I|| = {sampled:.6g} exceeds c = {p.c:.6g}"
        )
    transverse = sampled_transverse_bound(p, check_grid)
    if transverse > p.C + 1e-12:
        raise ContractionBoundError(
            f"sampled transverse bound {transverse:.6g} exceeds C = {p.C:.6g}"
        )
    _check_start(p, 1.0 / 3.0)

    v = transverse_basis(p)
    k = v.shape[1]
    if k == 0:
        raise ShapeError("the zero set is 0-dimensional: range(R) is everything")
    r_norm = p.r_norm
    factor = 0.5 if p.C == 0 else min(0.5, (1 - p.c) / (6 * p.C * r_norm))
    radius = p.r * factor
    guaranteed = (p.r * factor) ** k

    bounds = _parameter_bounds(v, radius)
    widths = [(hi - lo) / grid for lo, hi in bounds]
    cell = math.prod(widths)
    axes = [lo + (np.arange(grid) + 0.5) * w for (lo, _), w in zip(bounds, widths)]
    centers = np.array(list(itertools.product(*axes)))
    inside = centers[np.max(np.abs(centers @ v.T), axis=1) <= radius * (1 + 1e-12)]

    def solve(b: np.ndarray) -> np.ndarray:
        try:
            root, _ = newton_solve(p.recentered(p.x0 + v @ b, p.r / 2), validate=False)
        except NumericalFailure as e:
            raise NewtonNodeFailure(f"node {b.tolist()} failed: {e}", node=b) from e
        return root

    with ThreadPoolExecutor(max_workers=config.get_max_workers()) as pool:
        roots = list(pool.map(solve, inside))

    measure = len(inside) * cell
    holds = measure >= guaranteed * (1 - 1e-12)
    logger.info(
        f"[Newton] fiber: {len(inside)} nodes, measure {measure:.6g} vs guaranteed {guaranteed:.6g}"
    )
    if not holds:
        raise BoundViolationError(
            f"counted measure {measure:.6g} below guaranteed {guaranteed:.6g}; refine the grid"
        )
    return FiberMeasureResult(
        measure=measure,
        guaranteed_bound=guaranteed,
        nodes=len(inside),
        radius=radius,
        holds=holds,
        roots=np.array(roots).reshape(len(roots), p.n),
    )


# --- defining functions ---------------------------------------------------------------------


@dataclass(frozen=True)
class IncidenceModel:
    """Defining function rho(x, y) of an incidence relation with its derivative matrices."""

    rho: PairMap
    d_x: PairMap
    d_y: PairMap
    n: int
    codim: int
    degree: int = 2
    name: str = ""

    def value(self, x, y) -> np.ndarray:
        return _vector(self.rho(np.asarray(x, float), np.asarray(y, float)), "rho")

    def left(self, x, y) -> np.ndarray:
        return as_matrix(self.d_x(np.asarray(x, float), np.asarray(y, float)), "D_x rho")

    def right(self, x, y) -> np.ndarray:
        return as_matrix(self.d_y(np.asarray(x, float), np.asarray(y, float)), "D_y rho")


@dataclass
class NormalizedDefiningFunction:
    """rho~ = (D_x rho D_x rho^T)^(-1/2) rho with derivatives at one point."""

    value: np.ndarray
    d_x: np.ndarray
    d_y: np.ndarray
    gram_residual: Optional[float] = None
    det_ratio_residual: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "value": self.value.tolist(),
            "d_x": self.d_x.tolist(),
            "d_y": self.d_y.tolist(),
            "gram_residual": self.gram_residual,
            "det_ratio_residual": self.det_ratio_residual,
        }


def _normalizer(m: IncidenceModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    left = m.left(x, y)
    gram = left @ left.T
    if det(gram) <= config.get_tolerances().abs_tol:
        raise NotPositiveDefiniteError(
            f"det(D_x rho D_x rho^T) = {det(gram):.3e} is too small",
            smallest_eigenvalue=float(np.linalg.eigvalsh(gram)[0]),
        )
    return spd_inverse_sqrt(gram)


def _normalizer_slope(
    m: IncidenceModel, x: np.ndarray, y: np.ndarray, rho: np.ndarray, wrt_x: bool
) -> np.ndarray:
    base = x if wrt_x else y
    cols = []
    for i in range(base.size):
        h = config.FD_STEP * max(1.0, abs(base[i]))
        e = np.zeros_like(base)
        e[i] = h
        if wrt_x:
            plus, minus = _normalizer(m, x + e, y), _normalizer(m, x - e, y)
        else:
            plus, minus = _normalizer(m, x, y + e), _normalizer(m, x, y - e)
        cols.append((plus - minus) @ rho / (2 * h))
    return np.column_stack(cols)


def normalize_defining_function(m: IncidenceModel, x, y) -> NormalizedDefiningFunction:
    """Normalize rho so that D_x rho~ has orthonormal rows on the zero set.

    Away from the zero set (|rho| > 1e-10) the derivative picks up the
    variation of the normalizer, computed by central differences. On the
    zero set the row Gram matrix of D_x rho~ and the identity
    det(D_y rho~ D_y rho~^T) = det(D_y rho D_y rho^T) / det(D_x rho D_x rho^T)
    are checked.

    Raises:
        NotPositiveDefiniteError: det(D_x rho D_x rho^T) <= 1e-12.
        BoundViolationError: either identity fails on the zero set.
    """
    x = _vector(x, "x")
    y = _vector(y, "y")
    rho = m.value(x, y)
    left, right = m.left(x, y), m.right(x, y)
    s = _normalizer(m, x, y)
    d_x = s @ left
    d_y = s @ right
    if np.max(np.abs(rho)) > ZERO_TOL:
        d_x = d_x + _normalizer_slope(m, x, y, rho, wrt_x=True)
        d_y = d_y + _normalizer_slope(m, x, y, rho, wrt_x=False)
        return NormalizedDefiningFunction(value=s @ rho, d_x=d_x, d_y=d_y)

    gram_residual = float(np.max(np.abs(d_x @ d_x.T - np.eye(m.codim))))
    expected = det(right @ right.T) / det(left @ left.T)
    actual = det(d_y @ d_y.T)
    det_residual = abs(actual - expected) / max(1.0, abs(expected))
    if gram_residual > ORTHONORMAL_TOL or det_residual > ORTHONORMAL_TOL:
        raise BoundViolationError(
            f"normalization identities fail: gram {gram_residual:.3e}, det ratio {det_residual:.3e}"
        )
    return NormalizedDefiningFunction(
        value=s @ rho,
        d_x=d_x,
        d_y=d_y,
        gram_residual=gram_residual,
        det_ratio_residual=det_residual,
    )


def kappa_n(codim: int) -> float:
    """kappa' / 6, where kappa' = 1 / sqrt(codim) bounds ||R||^-1 for orthonormal columns R."""
    if codim < 1:
        raise ValueError(f"codim must be positive, got {codim}")
    return 1.0 / (6.0 * math.sqrt(codim))


def normalized_fiber_measure(
    model: IncidenceModel, x, y, delta: float, grid: int
) -> FiberMeasureResult:
    """Measure of Q(x, delta) intersected with the fiber over y, when |rho~(x, y)| < delta kappa_n.

    Runs :func:`fiber_measure_lower_bound` on x' -> rho~(x', y) with
    R = D_x rho~(x, y)^T and c = C = 1/2.
    """
    x = _vector(x, "x")
    y = _vector(y, "y")
    base = normalize_defining_function(model, x, y)
    kappa = kappa_n(model.codim)
    if not np.max(np.abs(base.value)) < delta * kappa:
        raise PreconditionError(
            f"|rho~(x, y)| = {np.max(np.abs(base.value)):.6g} is not below "
            f"delta kappa = {delta * kappa:.6g}"
        )

    def phi(point: np.ndarray) -> np.ndarray:
        return _normalizer(model, point, y) @ model.value(point, y)

    problem = NewtonProblem(phi=phi, x0=x, r=delta, R=base.d_x.T, c=0.5, C=0.5)
    return fiber_measure_lower_bound(problem, grid)
