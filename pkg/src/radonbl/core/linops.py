"""Dense linear-algebra kernels shared by every numerical module.

Matrices are plain float64 ``numpy.ndarray`` objects. Public functions validate
their inputs through :func:`as_matrix` and never mutate them.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from radonbl.core.config import get_tolerances
from radonbl.core.errors import NotPositiveDefiniteError, NotSymmetricError, ShapeError

COFACTOR_MAX = 4


@dataclass(frozen=True)
class TriangularizationResult:
    """Output of :func:`upper_triangularize`: ``U = T @ E``."""

    U: np.ndarray
    E: np.ndarray
    entry_sum: float


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Coerce ``value`` to a finite 2-D float array."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} has non-finite entries")
    return arr


def require_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")
    return m


def _cofactor_det(m: np.ndarray) -> float:
    size = m.shape[0]
    if size == 0:
        return 1.0
    if size == 1:
        return float(m[0, 0])
    if size == 2:
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    total = 0.0
    for col in range(size):
        if m[0, col] == 0.0:
            continue
        minor = np.delete(m[1:], col, axis=1)
        sign = -1.0 if col % 2 else 1.0
        total += sign * m[0, col] * _cofactor_det(minor)
    return total


def cofactor_det(m) -> float:
    """Laplace expansion along the first row; exponential cost, used as an oracle."""
    return _cofactor_det(require_square(m))


def det(m) -> float:
    """Determinant: exact cofactor expansion up to 4x4, LU with partial pivoting above."""
    m = require_square(m)
    size = m.shape[0]
    if size <= COFACTOR_MAX:
        return _cofactor_det(m)
    lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    swaps = int(np.count_nonzero(piv != np.arange(size)))
    sign = -1.0 if swaps % 2 else 1.0
    return sign * float(np.prod(np.diag(lu)))


def sym_eigh(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix.

    Returns ascending eigenvalues and orthonormal eigenvectors (columns).
    """
    m = require_square(m)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if not np.allclose(m, m.T, rtol=0.0, atol=get_tolerances().rel_tol * scale):
        raise NotSymmetricError("matrix is not symmetric")
    return np.linalg.eigh(0.5 * (m + m.T))


def spd_inverse_sqrt(m) -> np.ndarray:
    """Symmetric S with S @ m @ S = I.

    Raises:
        NotSymmetricError: input not symmetric.
        NotPositiveDefiniteError: smallest eigenvalue at most 1e-12 times the largest.
    """
    w, v = sym_eigh(m)
    if w.size == 0:
        return np.zeros((0, 0))
    if w[-1] <= 0 or w[0] <= get_tolerances().abs_tol * w[-1]:
        raise NotPositiveDefiniteError(
            f"matrix is not positive-definite (smallest eigenvalue {w[0]:.3e})",
            smallest_eigenvalue=float(w[0]),
        )
    s = (v / np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def spd_sqrt(m) -> np.ndarray:
    """Symmetric square root of an SPD matrix."""
    w, v = sym_eigh(m)
    if w.size and w[0] < 0:
        raise NotPositiveDefiniteError(
            f"matrix has a negative eigenvalue {w[0]:.3e}", smallest_eigenvalue=float(w[0])
        )
    s = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return 0.5 * (s + s.T)


def hs_norm(m) -> float:
    """Hilbert-Schmidt (Frobenius) norm."""
    return float(np.linalg.norm(as_matrix(m), "fro")) if np.size(m) else 0.0


def linf_operator_norm(m) -> float:
    """Operator norm l^inf -> l^inf, the maximal absolute row sum."""
    m = as_matrix(m)
    if m.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(m), axis=1)))


def random_sl(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random n x n matrix of determinant exactly +1 up to rounding."""
    while True:
        a = rng.standard_normal((n, n))
        d = det(a)
        if abs(d) > 1e-3:
            break
    if d < 0:
        a[:, 0] = -a[:, 0]
        d = -d
    return a / d ** (1.0 / n)


def upper_triangularize(t) -> TriangularizationResult:
    """Find E with det E = 1 such that U = T E is upper-triangular.

    The recursion pivots on the largest entry of the last row, eliminates it
    against the remaining columns and recurses on the leading block. All
    multipliers are bounded by 1, so sum |E_li| <= 2^d - 1.
    """
    t = require_square(t, "T")
    if t.shape[0] == 0:
        raise ShapeError("T must have dimension at least 1")
    e = _triangularize(t)
    u = np.triu(t @ e)
    return TriangularizationResult(U=u, E=e, entry_sum=float(np.sum(np.abs(e))))


def _triangularize(t: np.ndarray) -> np.ndarray:
    d = t.shape[0]
    if d == 1:
        return np.ones((1, 1))

    last = t[d - 1]
    e = np.zeros((d, d))
    if not np.any(last):
        e[: d - 1, : d - 1] = _triangularize(t[: d - 1, : d - 1])
        e[d - 1, d - 1] = 1.0
        return e

    magnitudes = np.abs(last)
    pivot = d - 1 if magnitudes[d - 1] == magnitudes.max() else int(np.argmax(magnitudes))
    perm = np.arange(d)
    perm[[pivot, d - 1]] = perm[[d - 1, pivot]]
    ts = t[:, perm]

    ratios = ts[d - 1, : d - 1] / ts[d - 1, d - 1]
    reduced = ts[: d - 1, : d - 1] - np.outer(ts[: d - 1, d - 1], ratios)
    inner = _triangularize(reduced)

    e[: d - 1, : d - 1] = inner
    e[d - 1, : d - 1] = -ratios @ inner
    e[d - 1, d - 1] = 1.0

    # undo the column swap on the rows of E; a transposition flips the sign
    e = e[np.argsort(perm)]
    if pivot != d - 1:
        e[:, 0] = -e[:, 0]
    return e
