"""Brascamp-Lieb data, constants and weights.

Three formulations of the reciprocal constant BL^-1 live here:

* the Gaussian determinant formula (:func:`gaussian_objective`), minimized
  directly by :func:`bl_constant_gaussian`;
* the minimum-vector formula (:func:`min_vector_objective`);
* alternating minimization between the two families of group variables
  (:func:`bl_constant_alternating`), which is the workhorse solver.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
import scipy.optimize

from radonbl.core import config
from radonbl.core.errors import (
    DeterminantConstraintError,
    NotPositiveDefiniteError,
    ScalingConditionError,
    ShapeError,
)
from radonbl.core.linops import as_matrix, det, hs_norm, spd_inverse_sqrt, sym_eigh
from radonbl.utils.helpers import fraction_from_json, fraction_to_json

logger = logging.getLogger(__name__)

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERS = "max_iters"
STATUS_ZERO_WEIGHT = "zero_weight"
STATUS_SEMI_STABLE = "semi_stable"


@dataclass(frozen=True)
class BLDatum:
    """A Brascamp-Lieb datum: maps pi_j of shape n_j x n with exponents p_j."""

    n: int
    dims: tuple[int, ...]
    exps: tuple[Fraction, ...]
    maps: tuple[np.ndarray, ...]

    def __post_init__(self):
        maps = tuple(as_matrix(mp, f"map {j}") for j, mp in enumerate(self.maps))
        exps = tuple(Fraction(p) for p in self.exps)
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "exps", exps)
        object.__setattr__(self, "dims", dims)

        if self.n < 1:
            raise ShapeError(f"ambient dimension must be positive, got {self.n}")
        if not len(dims) == len(exps) == len(maps) or not maps:
            raise ShapeError(
                f"need matching non-empty dims/exps/maps, got {len(dims)}/{len(exps)}/{len(maps)}"
            )
        for j, (dim, mp) in enumerate(zip(dims, maps)):
            if mp.shape != (dim, self.n):
                raise ShapeError(f"map {j} has shape {mp.shape}, expected {(dim, self.n)}")
            if not 1 <= dim <= self.n:
                raise ShapeError(f"map {j} target dimension {dim} outside [1, {self.n}]")
        for j, p in enumerate(exps):
            if not 0 < p <= 1:
                raise ScalingConditionError(f"exponent p_{j} = {p} outside (0, 1]")
        total = sum(p * d for p, d in zip(exps, dims))
        if total != self.n:
            raise ScalingConditionError(
                f"scaling condition fails: sum p_j n_j = {total} but n = {self.n}"
            )

    @property
    def m(self) -> int:
        return len(self.maps)

    @property
    def exps_float(self) -> np.ndarray:
        return np.array([float(p) for p in self.exps])

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "dims": list(self.dims),
            "exps": [fraction_to_json(p) for p in self.exps],
            "maps": [mp.ravel().tolist() for mp in self.maps],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "BLDatum":
        n = int(payload["n"])
        dims = [int(d) for d in payload["dims"]]
        if "m" in payload and int(payload["m"]) != len(dims):
            raise ShapeError(f"m = {payload['m']} disagrees with {len(dims)} dims")
        maps = [
            np.asarray(row, dtype=float).reshape(d, n) for row, d in zip(payload["maps"], dims)
        ]
        exps = [fraction_from_json(p) for p in payload["exps"]]
        return cls(n=n, dims=tuple(dims), exps=tuple(exps), maps=tuple(maps))


@dataclass(frozen=True)
class EqualExpDatum:
    """m maps R^n -> R^(n-k) sharing the exponent p = n / (m (n-k))."""

    n: int
    k: int
    maps: tuple[np.ndarray, ...]

    def __post_init__(self):
        maps = tuple(as_matrix(mp, f"map {j}") for j, mp in enumerate(self.maps))
        object.__setattr__(self, "maps", maps)
        if not 0 < self.k < self.n:
            raise ShapeError(f"need 0 < k < n, got k={self.k}, n={self.n}")
        if not maps:
            raise ShapeError("need at least one map")
        for j, mp in enumerate(maps):
            if mp.shape != (self.n - self.k, self.n):
                raise ShapeError(
                    f"map {j} has shape {mp.shape}, expected {(self.n - self.k, self.n)}"
                )

    @property
    def m(self) -> int:
        return len(self.maps)

    @property
    def codim(self) -> int:
        return self.n - self.k

    @property
    def p(self) -> Fraction:
        return Fraction(self.n, self.m * self.codim)

    def to_bl_datum(self) -> BLDatum:
        return BLDatum(
            n=self.n,
            dims=(self.codim,) * self.m,
            exps=(self.p,) * self.m,
            maps=self.maps,
        )


@dataclass
class BLResult:
    """Outcome of a BL solve."""

    value: float
    iterations: int
    converged: bool
    residual: float
    # (A_1, ..., A_m, A) for the alternating solver, (X_1, ..., X_m) for the Gaussian one
    witness: Optional[tuple[np.ndarray, ...]] = None
    status: str = STATUS_CONVERGED
    regularized: bool = False
    history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual": self.residual,
            "status": self.status,
            "regularized": self.regularized,
            "witness": [w.tolist() for w in self.witness] if self.witness else None,
        }


def _check_spd_shapes(d: BLDatum, spd_params: Sequence[np.ndarray]) -> list[np.ndarray]:
    if len(spd_params) != d.m:
        raise ShapeError(f"expected {d.m} SPD parameters, got {len(spd_params)}")
    out = []
    for j, (x, dim) in enumerate(zip(spd_params, d.dims)):
        x = as_matrix(x, f"X_{j}")
        if x.shape != (dim, dim):
            raise ShapeError(f"X_{j} has shape {x.shape}, expected {(dim, dim)}")
        w, _ = sym_eigh(x)
        if w[0] <= 0:
            raise NotPositiveDefiniteError(
                f"X_{j} is not positive-definite", smallest_eigenvalue=float(w[0])
            )
        out.append(x)
    return out


def gaussian_objective(d: BLDatum, spd_params: Sequence[np.ndarray]) -> float:
    """[det(sum_j p_j pi_j^T X_j pi_j) / prod_j det(X_j)^p_j]^(1/2)."""
    xs = _check_spd_shapes(d, spd_params)
    p = d.exps_float
    central = sum(pj * mp.T @ x @ mp for pj, mp, x in zip(p, d.maps, xs))
    num = det(central)
    if num <= 0:
        return 0.0
    log_den = sum(pj * math.log(det(x)) for pj, x in zip(p, xs))
    return math.exp(0.5 * (math.log(num) - log_den))


def min_vector_objective(d: BLDatum, a_list: Sequence[np.ndarray], a: np.ndarray) -> float:
    """prod_j n_j^(-p_j n_j / 2) |||A_j pi_j A^T|||^(p_j n_j) for unit-determinant A_j, A."""
    if len(a_list) != d.m:
        raise ShapeError(f"expected {d.m} matrices A_j, got {len(a_list)}")
    a = as_matrix(a, "A")
    if a.shape != (d.n, d.n):
        raise ShapeError(f"A has shape {a.shape}, expected {(d.n, d.n)}")
    if abs(det(a) - 1.0) > 1e-6:
        raise DeterminantConstraintError(f"det A = {det(a):.9g}, expected 1")
    value = 1.0
    for j, (aj, mp, dim, pj) in enumerate(zip(a_list, d.maps, d.dims, d.exps_float)):
        aj = as_matrix(aj, f"A_{j}")
        if aj.shape != (dim, dim):
            raise ShapeError(f"A_{j} has shape {aj.shape}, expected {(dim, dim)}")
        if abs(det(aj) - 1.0) > 1e-6:
            raise DeterminantConstraintError(f"det A_{j} = {det(aj):.9g}, expected 1")
        exponent = pj * dim
        value *= dim ** (-exponent / 2.0) * hs_norm(aj @ mp @ a.T) ** exponent
    return value


def _regularize(g: np.ndarray) -> np.ndarray:
    eps = config.REGULARIZATION * float(np.trace(g))
    if eps <= 0:
        eps = config.REGULARIZATION
    return g + eps * np.eye(g.shape[0])


def _gram_blocks(d: BLDatum, a: np.ndarray) -> tuple[list[np.ndarray], bool]:
    """G_j = B_j B_j^T with B_j = pi_j A^T, regularized when numerically singular."""
    grams = []
    regularized = False
    for mp in d.maps:
        b = mp @ a.T
        g = b @ b.T
        g = 0.5 * (g + g.T)
        w = np.linalg.eigvalsh(g)
        if w[0] <= config.REGULARIZATION * max(w[-1], 0.0) or w[-1] <= 0:
            g = _regularize(g)
            regularized = True
        grams.append(g)
    return grams, regularized


def _optimal_aj(g: np.ndarray) -> np.ndarray:
    """SL-optimal A_j for fixed A: A_j^T A_j = det(G)^(1/n_j) G^-1."""
    dim = g.shape[0]
    return det(g) ** (1.0 / (2 * dim)) * spd_inverse_sqrt(g)


def witness_spd_params(d: BLDatum, a: np.ndarray) -> list[np.ndarray]:
    """Gaussian parameters X_j = (pi_j A^T A pi_j^T)^-1 paired with ``a``."""
    grams, _ = _gram_blocks(d, as_matrix(a, "A"))
    return [np.linalg.inv(g) for g in grams]


def _a_update(d: BLDatum, xs: list[np.ndarray], kernel_steps: int) -> tuple[np.ndarray, bool]:
    """A = M^(-1/2) det(M)^(1/(2n)), or the kernel-limit split when M is singular."""
    n = d.n
    m_mat = sum(pj * mp.T @ x @ mp for pj, mp, x in zip(d.exps_float, d.maps, xs))
    m_mat = 0.5 * (m_mat + m_mat.T)
    w, v = np.linalg.eigh(m_mat)
    scale = max(float(w[-1]), 0.0)
    det_m = float(np.prod(w))
    if scale > 0 and det_m > config.KERNEL_DET_RATIO * scale**n:
        s = (v / np.sqrt(w)) @ v.T
        return det_m ** (1.0 / (2 * n)) * 0.5 * (s + s.T), False

    # kernel-limit branch: A_t = t^(1/l) P + t^(-1/(n-l)) (I - P)
    kernel = w <= max(config.KERNEL_DET_RATIO ** (1.0 / n), 1e-12) * scale
    ell = int(np.count_nonzero(kernel))
    if ell in (0, n):
        ell = max(1, min(n - 1, ell))
        kernel = np.arange(n) < ell
    p_mat = v[:, kernel] @ v[:, kernel].T
    t = config.KERNEL_GROWTH ** (kernel_steps + 1)
    a = t ** (1.0 / ell) * p_mat + t ** (-1.0 / (n - ell)) * (np.eye(n) - p_mat)
    return a, True


def bl_constant_alternating(
    d: BLDatum, max_iters: int = config.BL_MAX_ITERS, tol: float = config.BL_TOL
) -> BLResult:
    """Estimate BL^-1 by alternating exact minimization over (A_j) and A.

    Args:
        d: the datum.
        max_iters: iteration budget.
        tol: stop when the relative objective change drops below this.

    Returns:
        BLResult whose value is the min-vector objective at the final iterate.
        ``converged`` is False when the budget ran out or the weight was
        detected to be zero / not attained.
    """
    # pylint: disable=logging-fstring-interpolation
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be at least 1, got {max_iters}")

    n = d.n
    p = d.exps_float
    a = np.eye(n)
    history: list[float] = []
    regularized = False
    kernel_steps = 0
    big_drops = 0
    status = STATUS_MAX_ITERS
    residual = float("inf")
    iteration = 0

    for iteration in range(1, max_iters + 1):
        grams, reg = _gram_blocks(d, a)
        if reg and not regularized:
            logger.warning("[BL] singular B_j B_j^T encountered, regularizing")
        regularized = regularized or reg

        log_value = sum(0.5 * pj * math.log(det(g)) for pj, g in zip(p, grams))
        value = math.exp(log_value)
        if history:
            prev = history[-1]
            residual = abs(prev - value) / prev if prev > 0 else 0.0
            big_drops = big_drops + 1 if prev > 0 and (prev - value) / prev > 0.5 else 0
        history.append(value)

        if value < config.SEMISTABLE_FLOOR:
            status = STATUS_ZERO_WEIGHT
            break
        if big_drops >= config.SEMISTABLE_STREAK:
            status = STATUS_SEMI_STABLE
            break
        if len(history) > 1 and residual < tol:
            status = STATUS_CONVERGED
            break

        xs = [np.linalg.inv(g) for g in grams]
        a, kernel = _a_update(d, xs, kernel_steps)
        kernel_steps = kernel_steps + 1 if kernel else 0

    grams, _ = _gram_blocks(d, a)
    witness = tuple(_optimal_aj(g) for g in grams) + (a,)
    converged = status == STATUS_CONVERGED
    logger.info(
        f"[BL] {status} after {iteration} iterations, value={history[-1]:.12g}, "
        f"residual={residual:.3e}"
    )
    return BLResult(
        value=history[-1],
        iterations=iteration,
        converged=converged,
        residual=0.0 if math.isinf(residual) else residual,
        witness=witness,
        status=status,
        regularized=regularized,
        history=history,
    )


def _unpack_cholesky(theta: np.ndarray, dims: tuple[int, ...]) -> list[np.ndarray]:
    factors = []
    offset = 0
    for j, dim in enumerate(dims):
        low = np.zeros((dim, dim))
        rows, cols = np.tril_indices(dim)
        count = len(rows)
        values = theta[offset : offset + count]
        offset += count
        low[rows, cols] = values
        diag = np.exp(np.diag(low))
        if j == 0:
            # pins the joint scaling X_j -> t X_j, under which the objective is flat
            diag[0] = 1.0
        low[np.diag_indices(dim)] = diag
        factors.append(low)
    return factors


def bl_constant_gaussian(
    d: BLDatum, max_iters: int = config.BL_MAX_ITERS, tol: float = 1e-12
) -> BLResult:
    """Estimate BL^-1 by minimizing the Gaussian objective with BFGS.

    Independent of :func:`bl_constant_alternating`; the two are compared in
    the formulation-agreement checks. Parameters are log-Cholesky factors
    of X_j.
    """
    p = d.exps_float
    dims = d.dims

    def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
        factors = _unpack_cholesky(theta, dims)
        xs = [low @ low.T for low in factors]
        central = sum(pj * mp.T @ x @ mp for pj, mp, x in zip(p, d.maps, xs))
        sign, logdet_m = np.linalg.slogdet(central)
        if sign <= 0:
            return 1e300, np.zeros_like(theta)
        inv_m = np.linalg.inv(central)
        value = 0.5 * logdet_m
        grad = []
        for j, (pj, mp, low) in enumerate(zip(p, d.maps, factors)):
            value -= pj * float(np.sum(np.log(np.abs(np.diag(low)))))
            g_x = 0.5 * pj * (mp @ inv_m @ mp.T - np.linalg.inv(low @ low.T))
            g_low = 2.0 * g_x @ low
            dim = low.shape[0]
            g_low[np.diag_indices(dim)] *= np.diag(low)
            if j == 0:
                g_low[0, 0] = 0.0
            grad.append(g_low[np.tril_indices(dim)])
        return value, np.concatenate(grad)

    theta0 = np.zeros(sum(dim * (dim + 1) // 2 for dim in dims))
    res = scipy.optimize.minimize(
        objective,
        theta0,
        jac=True,
        method="BFGS",
        options={"maxiter": max_iters, "gtol": tol},
    )
    xs = tuple(low @ low.T for low in _unpack_cholesky(res.x, dims))
    value = gaussian_objective(d, xs)
    grad_norm = float(np.max(np.abs(res.jac))) if res.jac is not None else 0.0
    converged = bool(res.success) or grad_norm < 1e-8
    # pylint: disable=logging-fstring-interpolation
    logger.info(f"[BL] gaussian BFGS nit={res.nit} value={value:.12g} |grad|={grad_norm:.2e}")
    return BLResult(
        value=value,
        iterations=int(res.nit),
        converged=converged,
        residual=grad_norm,
        witness=xs,
        status=STATUS_CONVERGED if converged else STATUS_MAX_ITERS,
    )


def bl_weight_root(
    d: EqualExpDatum, max_iters: int = config.BL_MAX_ITERS, tol: float = config.BL_TOL
) -> BLResult:
    """W^(1/p) for an equal-exponent datum.

    W is BL^-1 of the datum with every p_j = n / (m (n-k)); the solve is
    delegated to :func:`bl_constant_alternating` and the value raised to 1/p.
    """
    inner = bl_constant_alternating(d.to_bl_datum(), max_iters=max_iters, tol=tol)
    power = 1.0 / float(d.p)
    return BLResult(
        value=inner.value**power,
        iterations=inner.iterations,
        converged=inner.converged,
        residual=inner.residual,
        witness=inner.witness,
        status=inner.status,
        regularized=inner.regularized,
        history=[v**power for v in inner.history],
    )


def check_scaling_identity(
    d: EqualExpDatum,
    m_list: Sequence[np.ndarray],
    max_iters: int = config.BL_MAX_ITERS,
    tol: float = config.BL_TOL,
) -> float:
    """Relative gap in W^(1/p)(M_j pi_j) = W^(1/p)(pi_j) prod_j |det M_j|."""
    if len(m_list) != d.m:
        raise ShapeError(f"expected {d.m} matrices M_j, got {len(m_list)}")
    dets = []
    scaled = []
    for j, (mj, mp) in enumerate(zip(m_list, d.maps)):
        mj = as_matrix(mj, f"M_{j}")
        if mj.shape != (d.codim, d.codim):
            raise ShapeError(f"M_{j} has shape {mj.shape}, expected {(d.codim, d.codim)}")
        dj = det(mj)
        if abs(dj) <= 1e-14:
            raise ShapeError(f"M_{j} is singular")
        dets.append(abs(dj))
        scaled.append(mj @ mp)

    left = bl_weight_root(EqualExpDatum(d.n, d.k, tuple(scaled)), max_iters, tol).value
    right = bl_weight_root(d, max_iters, tol).value * float(np.prod(dets))
    scale = max(abs(left), abs(right))
    if scale == 0:
        return 0.0
    return abs(left - right) / scale
