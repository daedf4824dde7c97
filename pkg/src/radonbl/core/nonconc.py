"""Nonconcentration machinery.

* :func:`convprop_construct` finds, for a finite-dimensional function space on
  a discrete measure, a large subset on which a fixed spanning family is
  bounded by 1; every function of the span is then large on a set of
  proportional measure.
* :func:`separated_points` picks well-separated points from a union of
  intervals, the input of the Vandermonde nonconcentration bound.
* :class:`QuadraticModel` with :func:`minor_condition`, :func:`density_K` and
  :func:`derivative_identity_check` covers the quadratic model operator's
  derivative density.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from radonbl.core.errors import BudgetExceededError, EmptySpaceError, ShapeError
from radonbl.core.invariant_poly import ur_block_matrix
from radonbl.core.linops import as_matrix, det
from radonbl.utils.helpers import spawn_rng

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
COMPARE_TOL = 1e-12
DEGENERATE_TRIALS = 200
EXCHANGE_PASSES = 50
TRIM_ROUNDS = 8
POLARIZATION_BUDGET = 6


@dataclass(frozen=True)
class SampleSpace:
    """Weighted points with d basis functions evaluated at every point."""

    points: np.ndarray
    weights: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        weights = np.asarray(self.weights, dtype=float).ravel()
        basis = as_matrix(self.basis, "basis")
        if basis.shape[0] != weights.shape[0] or points.shape[0] != weights.shape[0]:
            raise ShapeError(
                f"points/weights/basis disagree: {points.shape[0]}/{weights.shape[0]}/"
                f"{basis.shape[0]} rows"
            )
        if weights.size == 0:
            raise EmptySpaceError("sample space has no points")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ShapeError("weights must be finite and nonnegative")
        if basis.shape[1] < 1:
            raise ShapeError("need at least one basis function")
        sv = np.linalg.svd(basis, compute_uv=False)
        if sv[-1] <= RANK_TOL * sv[0] or basis.shape[1] > basis.shape[0]:
            raise ShapeError("basis columns are linearly dependent")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "basis", basis)

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def to_json(self) -> dict:
        return {
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
            "basis": self.basis.tolist(),
        }

    @classmethod
    def from_json(cls, payload: dict) -> "SampleSpace":
        return cls(
            points=np.asarray(payload["points"], dtype=float),
            weights=np.asarray(payload["weights"], dtype=float),
            basis=np.asarray(payload["basis"], dtype=float),
        )


@dataclass(frozen=True)
class ConvpropCertificate:
    """X_delta with its witness family: f_j vanish on X_delta for j < j0, |f_j| <= 1 for j >= j0."""

    selected_indices: np.ndarray
    witness_functions: tuple[np.ndarray, ...]
    j0: int
    delta: float

    def selected_mass(self, space: SampleSpace) -> float:
        return math.fsum(space.weights[self.selected_indices])

    def check(self, space: SampleSpace) -> bool:
        """Mass bound and the vanishing / boundedness pattern on X_delta."""
        if self.selected_mass(space) < (1 - self.delta) * space.total_mass * (1 - 1e-12):
            return False
        rows = space.basis[self.selected_indices]
        for j, coeffs in enumerate(self.witness_functions):
            values = np.abs(rows @ coeffs)
            limit = 1e-9 if j < self.j0 else 1.0 + 1e-9
            if values.size and values.max() > limit:
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "selected_indices": self.selected_indices.tolist(),
            "witness_functions": [f.tolist() for f in self.witness_functions],
            "j0": self.j0,
            "delta": self.delta,
        }


@dataclass(frozen=True)
class QuadraticModel:
    """Coefficients lambda (c x k) of y'' = x'' + 1/2 sum_i lambda_ji t_i^2, with k < n <= 2k."""

    n: int
    k: int
    lam: np.ndarray

    def __post_init__(self):
        lam = as_matrix(self.lam, "lambda")
        if not 0 < self.k < self.n <= 2 * self.k:
            raise ShapeError(f"need k < n <= 2k, got n={self.n}, k={self.k}")
        if lam.shape != (self.n - self.k, self.k):
            raise ShapeError(f"lambda has shape {lam.shape}, expected {(self.n - self.k, self.k)}")
        object.__setattr__(self, "lam", lam)

    @property
    def c(self) -> int:
        return self.n - self.k

    def b_matrix(self, t: Sequence[float]) -> np.ndarray:
        """B(t)_ji = t_i lambda_ji."""
        t = np.asarray(t, dtype=float).ravel()
        if t.shape != (self.k,):
            raise ShapeError(f"expected a point of R^{self.k}, got shape {t.shape}")
        return self.lam * t[None, :]

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "lambda": self.lam.tolist()}


# --- convprop -------------------------------------------------------------------------------


def _threshold(values: np.ndarray, prob: np.ndarray, eps: float) -> float:
    """Smallest u in {0} U values with mu(|f| > u) <= eps, i.e. 1 / L_eps(f)."""
    order = np.argsort(values)
    asc = values[order]
    suffix = np.concatenate([np.cumsum(prob[order][::-1])[::-1], [0.0]])
    tol = COMPARE_TOL * (asc[-1] if asc.size else 0.0)
    for u in np.concatenate([[0.0], np.unique(asc)]):
        above = suffix[np.searchsorted(asc, u + tol, side="right")]
        if above <= eps:
            return float(u)
    return float(asc[-1])


def _cofactor_row(f: np.ndarray, slot: int) -> np.ndarray:
    """w with det(F with column ``slot`` replaced by a) = w . a."""
    d = f.shape[0]
    out = np.zeros(d)
    others = [c for c in range(d) if c != slot]
    for i in range(d):
        rows = [r for r in range(d) if r != i]
        minor = f[np.ix_(rows, others)] if d > 1 else np.zeros((0, 0))
        out[i] = (-1) ** (i + slot) * det(minor)
    return out


def _best_replacement(
    basis: np.ndarray, prob: np.ndarray, eps: float, cof: np.ndarray
) -> tuple[Optional[np.ndarray], float]:
    """Approximately maximize |cof . a| over a in F_eps.

    Solves the LP over {|B_x a| <= 1 on kept points} and trims the binding
    points while the removed mass stays within eps. Returns (a, value) with a
    scaled onto the boundary of F_eps, or (a, inf) when a small-support
    function turns up.
    """
    npts, d = basis.shape
    keep = np.ones(npts, dtype=bool)
    removed = 0.0
    best_a, best_val = None, -1.0
    for _ in range(TRIM_ROUNDS):
        rows = basis[keep]
        res = scipy.optimize.linprog(
            -cof,
            A_ub=np.vstack([rows, -rows]),
            b_ub=np.ones(2 * rows.shape[0]),
            bounds=[(None, None)] * d,
            method="highs",
        )
        if res.status != 0:
            break
        a = res.x
        values = np.abs(basis @ a)
        q = _threshold(values, prob, eps)
        if q <= 0:
            return a, math.inf
        val = abs(float(cof @ a)) / q
        if val > best_val:
            best_a, best_val = a / q, val

        kept_idx = np.flatnonzero(keep)
        kept_vals = values[kept_idx]
        trimmed = False
        for idx in kept_idx[np.argsort(-kept_vals, kind="stable")]:
            if values[idx] < 1.0 - 1e-9:
                break
            if removed + prob[idx] > eps:
                break
            keep[idx] = False
            removed += prob[idx]
            trimmed = True
        if not trimmed:
            break
    return best_a, best_val


def _find_small_support(
    basis: np.ndarray, prob: np.ndarray, eps: float, seed: int
) -> Optional[np.ndarray]:
    """Nonzero a with mu(B a != 0) <= eps, searched over kernels of (d-1)-point subsets."""
    npts, d = basis.shape
    scale = float(np.max(np.abs(basis)))

    def small(a: np.ndarray) -> bool:
        support = np.abs(basis @ a) > COMPARE_TOL * scale * max(1.0, float(np.abs(a).sum()))
        return math.fsum(prob[support]) <= eps

    if d == 1:
        a = np.ones(1)
        return a if small(a) else None

    heavy = np.argsort(-prob, kind="stable")[: min(npts, d + 3)]
    candidates = list(itertools.combinations(heavy.tolist(), d - 1))
    rng = spawn_rng(seed, 0)
    positive = np.flatnonzero(prob > 0)
    if positive.size >= d - 1:
        for _ in range(DEGENERATE_TRIALS):
            pick = rng.choice(
                positive, size=d - 1, replace=False, p=prob[positive] / prob[positive].sum()
            )
            candidates.append(tuple(sorted(pick.tolist())))
    for subset in candidates:
        kernel = scipy.linalg.null_space(basis[list(subset)], rcond=RANK_TOL)
        if kernel.shape[1] == 0:
            continue
        a = kernel[:, 0]
        if small(a):
            return a
    return None


def _degenerate_branch(
    basis: np.ndarray, prob: np.ndarray, delta: float, f1: np.ndarray, seed: int, depth: int
) -> tuple[np.ndarray, list[np.ndarray], int]:
    """Restrict to the zero set of a small-support function and recurse in lower dimension."""
    npts, d = basis.shape
    scale = float(np.max(np.abs(basis)))
    zero = np.abs(basis @ f1) <= COMPARE_TOL * scale * max(1.0, float(np.abs(f1).sum()))
    zero_idx = np.flatnonzero(zero)
    restricted = basis[zero_idx]

    _, sv, vt = np.linalg.svd(restricted, full_matrices=True)
    rank = int(np.count_nonzero(sv > RANK_TOL * sv[0])) if sv.size and sv[0] > 0 else 0
    kernel = vt[rank:].T
    vanishing = [kernel[:, i] for i in range(kernel.shape[1])]
    logger.info(  # pylint: disable=logging-fstring-interpolation
        f"[Convprop] depth {depth}: {npts - zero_idx.size} points off a small-support "
        f"zero set, restricting to rank {rank}"
    )

    if rank == 0:
        return zero_idx, vanishing, len(vanishing)

    lift = vt[:rank].T
    sub_prob = prob[zero_idx]
    sub_delta = rank * delta / (d - delta)
    sub_idx, sub_funcs, sub_j0 = _construct(
        restricted @ lift, sub_prob / sub_prob.sum(), sub_delta, seed, depth + 1
    )
    lifted = [lift @ f for f in sub_funcs]
    return zero_idx[sub_idx], vanishing + lifted, len(vanishing) + sub_j0


def _construct(
    basis: np.ndarray, prob: np.ndarray, delta: float, seed: int, depth: int = 0
) -> tuple[np.ndarray, list[np.ndarray], int]:
    # pylint: disable=logging-fstring-interpolation
    d = basis.shape[1]
    eps = delta / d

    small = _find_small_support(basis, prob, eps, seed + depth)
    if small is not None:
        return _degenerate_branch(basis, prob, delta, small, seed, depth)

    # greedy seeding from coordinate directions scaled onto the boundary of F_eps
    family = np.zeros((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        q = _threshold(np.abs(basis @ e), prob, eps)
        if q <= 0:
            return _degenerate_branch(basis, prob, delta, e, seed, depth)
        family[:, i] = e / q

    current = abs(det(family))
    for sweep in range(EXCHANGE_PASSES):
        improved = False
        for slot in range(d):
            cof = _cofactor_row(family, slot)
            a, val = _best_replacement(basis, prob, eps, cof)
            if a is None:
                continue
            if math.isinf(val):
                return _degenerate_branch(basis, prob, delta, a, seed, depth)
            if val > current * (1 + 1e-9):
                family[:, slot] = a
                current = abs(det(family))
                improved = True
        if not improved:
            logger.info(
                f"[Convprop] exchange search settled after {sweep + 1} passes, |det|={current:.6g}"
            )
            break

    values = np.abs(basis @ family)
    selected = np.flatnonzero(np.all(values <= 1.0 + COMPARE_TOL, axis=1))
    return selected, [family[:, i].copy() for i in range(d)], 0


def convprop_construct(space: SampleSpace, delta: float, seed: int = 0) -> ConvpropCertificate:
    """Build X_delta with mu(X_delta) >= (1 - delta) mu(X) and its witness family.

    Args:
        space: the weighted sample space.
        delta: mass fraction allowed to be discarded, in (0, 1).
        seed: drives the randomized search for small-support functions.

    Returns:
        ConvpropCertificate. Witness coefficients are expressed in the basis of ``space``.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    total = space.total_mass
    if total <= 0:
        raise EmptySpaceError("sample space has zero total weight")
    selected, funcs, j0 = _construct(space.basis, space.weights / total, delta, seed)
    return ConvpropCertificate(
        selected_indices=np.sort(selected),
        witness_functions=tuple(funcs),
        j0=j0,
        delta=delta,
    )


def mustbebig_slack(space: SampleSpace, cert: ConvpropCertificate, coeffs: np.ndarray) -> float:
    """mu(|f| >= sup over X_delta of |f| / d), divided by delta mu(X) / d.

    At least 1 exactly when f is large on a set of proportional measure.
    """
    values = np.abs(space.basis @ np.asarray(coeffs, dtype=float))
    top = float(values[cert.selected_indices].max()) if cert.selected_indices.size else 0.0
    level = top / space.d
    mass = math.fsum(space.weights[values >= level * (1 - COMPARE_TOL)])
    target = cert.delta * space.total_mass / space.d
    return math.inf if target == 0 else mass / target


# --- separated points -----------------------------------------------------------------------


def _merge(intervals: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    pieces = sorted((float(a), float(b)) for a, b in intervals if float(b) > float(a))
    merged: list[list[float]] = []
    for a, b in pieces:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def separated_points(intervals: Sequence[Sequence[float]], count: int) -> list[float]:
    """``count`` points of a finite union of closed intervals F, pairwise |F| / (2 count - 1) apart.

    F is cut into cells of that length; at least 2 count - 1 cells meet F in
    positive measure and greedily taking non-adjacent ones yields ``count``.
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    merged = _merge(intervals)
    measure = math.fsum(b - a for a, b in merged)
    if measure <= 0:
        raise EmptySpaceError("F has zero measure")
    length = measure / (2 * count - 1)

    occupied: dict[int, float] = {}
    for a, b in merged:
        for cell in range(math.floor(a / length), math.ceil(b / length) + 1):
            lo, hi = max(a, cell * length), min(b, (cell + 1) * length)
            if hi > lo and cell not in occupied:
                occupied[cell] = 0.5 * (lo + hi)

    chosen: list[float] = []
    last = None
    for cell in sorted(occupied):
        if last is None or cell > last + 1:
            chosen.append(occupied[cell])
            last = cell
            if len(chosen) == count:
                break
    if len(chosen) < count:
        raise EmptySpaceError(f"only {len(chosen)} separated cells found for {count} points")
    return chosen


def vandermonde_nonconcentration(
    intervals: Sequence[Sequence[float]], n: int
) -> tuple[list[float], float, float]:
    """Separated points t, prod_{i<j}|t_i - t_j|, and the guarantee (|F| / (2n - 1))^(n(n-1)/2)."""
    points = separated_points(intervals, n)
    product = math.prod(abs(a - b) for a, b in itertools.combinations(points, 2))
    measure = math.fsum(b - a for a, b in _merge(intervals))
    return points, product, (measure / (2 * n - 1)) ** (n * (n - 1) / 2)


# --- quadratic model densities --------------------------------------------------------------


def _periodic_minor(lam: np.ndarray, start: int) -> float:
    c, k = lam.shape
    cols = [(start + r) % k for r in range(c)]
    return det(lam[:, cols])


def minor_condition(model: QuadraticModel) -> list[float]:
    """The k periodic c x c minors of lambda, columns i, ..., i+c-1 mod k."""
    return [_periodic_minor(model.lam, i) for i in range(model.k)]


def density_K(model: QuadraticModel) -> float:  # pylint: disable=invalid-name
    """|prod_{j<k} det(lambda columns jc, ..., jc+c-1 mod k)|."""
    return abs(math.prod(_periodic_minor(model.lam, j * model.c) for j in range(model.k)))


def _derivative_weights(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights with sum_l w_l p(x_l) = p'(0) for every polynomial of this degree."""
    nodes = np.arange(degree + 1, dtype=float) - degree // 2
    vander = np.vander(nodes, degree + 1, increasing=True).T
    rhs = np.zeros(degree + 1)
    rhs[1] = 1.0
    return nodes, np.linalg.solve(vander, rhs)


def derivative_identity_check(
    model: QuadraticModel,
    u: np.ndarray,
    base_point: Sequence[float],
    orders: Optional[Sequence[int]] = None,
) -> float:
    """Compare the mixed derivative of Phi^UR with det(U)^c times the strided minors.

    Variable t^(i) is differentiated along columns (i c + r) mod k of U,
    r < orders[i]. With full orders the result is compared against
    det(U)^c prod_j det(lambda strided block j); with any lower order the
    derivative must vanish. The derivative is extracted exactly by tensor
    products of polynomial-exact derivative stencils.

    Returns:
        Discrepancy relative to max(1, |expected|).
    """
    k, c = model.k, model.c
    if k * c > POLARIZATION_BUDGET:
        raise BudgetExceededError(f"k*c = {k * c} exceeds {POLARIZATION_BUDGET}")
    u = as_matrix(u, "U")
    if u.shape != (k, k):
        raise ShapeError(f"U has shape {u.shape}, expected {(k, k)}")
    if np.any(np.tril(u, -1)):
        raise ShapeError("U must be upper-triangular")
    t0 = np.asarray(base_point, dtype=float).ravel()
    if t0.shape != (k,):
        raise ShapeError(f"base point must lie in R^{k}")
    orders = [c] * k if orders is None else [int(o) for o in orders]
    if len(orders) != k or any(not 0 <= o <= c for o in orders):
        raise ValueError(f"orders must be {k} integers in [0, {c}]")

    directions = []
    for i in range(k):
        directions.append([u[:, (i * c + r) % k] for r in range(orders[i])])
    flat = [(i, v) for i, group in enumerate(directions) for v in group]

    nodes, weights = _derivative_weights(c)
    grid = list(itertools.product(range(len(nodes)), repeat=len(flat)))
    mats = np.zeros((len(grid), k * c, k * c))
    coeffs = np.ones(len(grid))
    for g, combo in enumerate(grid):
        shifts = [np.zeros(k) for _ in range(k)]
        for (i, v), node_idx in zip(flat, combo):
            shifts[i] = shifts[i] + nodes[node_idx] * v
            coeffs[g] *= weights[node_idx]
        blocks = [model.b_matrix(t0 + s) - model.b_matrix(t0) for s in shifts]
        mats[g] = ur_block_matrix(blocks, k, c)
    total = float(np.sum(coeffs * np.linalg.det(mats)))

    if orders == [c] * k:
        expected = det(u) ** c * math.prod(_periodic_minor(model.lam, j * c) for j in range(k))
    else:
        expected = 0.0
    return abs(total - expected) / max(1.0, abs(expected))
