"""Built-in named data and problem builders shared by the CLI and the tests."""

from typing import Optional, Sequence

import numpy as np

from radonbl.core.bl_core import EqualExpDatum
from radonbl.core.errors import ManifestError
from radonbl.core.ift_newton import NewtonProblem
from radonbl.core.invariant_poly import (
    BlockPolySpec,
    max_codim_pi,
    max_codim_spec,
    moment_curve_pi,
    moment_curve_spec,
    quadratic_model_spec,
)
from radonbl.core.nonconc import QuadraticModel, SampleSpace
from radonbl.core.radon_lab import ModelKind, ModelOperator, left_derivative_matrix

NAMED_DATA = (
    "loomis-whitney-2d",
    "loomis-whitney-3d",
    "moment-curve-n2",
    "moment-curve-n3",
    "moment-curve-n4",
    "parabola",
    "max-codim-k1",
)

MODEL_NAMES = ("quadratic", "moment", "max-codim", "parabola")
PROBLEM_NAMES = ("parabola-zero", "sine")


def named_datum(name: str) -> EqualExpDatum:
    """Equal-exponent data known by name."""
    eye = np.eye(3)
    if name == "loomis-whitney-2d":
        return EqualExpDatum(2, 1, (np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])))
    if name == "loomis-whitney-3d":
        maps = tuple(np.delete(eye, j, axis=0) for j in range(3))
        return EqualExpDatum(3, 1, maps)
    if name.startswith("moment-curve-n") and name in NAMED_DATA:
        n = int(name.rsplit("n", 1)[1])
        return EqualExpDatum(n, 1, tuple(moment_curve_pi(float(t), n) for t in range(n)))
    if name == "parabola":
        return EqualExpDatum(2, 1, tuple(model_maps(build_operator("parabola"), [0.0, 1.0])))
    if name == "max-codim-k1":
        return EqualExpDatum(2, 1, tuple(max_codim_pi([y], 1) for y in (0.0, 1.0)))
    raise ManifestError(f"unknown datum {name!r}; known: {', '.join(NAMED_DATA)}")


def build_operator(
    model: str, n: Optional[int] = None, k: Optional[int] = None, lam=None
) -> ModelOperator:
    """ModelOperator from CLI-style fields."""
    if model == "parabola":
        return ModelOperator.quadratic(QuadraticModel(2, 1, np.array([[1.0]])))
    if model == "moment":
        if n is None:
            raise ManifestError("moment model needs n")
        return ModelOperator.moment_curve(int(n))
    if model == "max-codim":
        return ModelOperator.max_codim(int(k or 1))
    if model == "quadratic":
        if n is None or k is None:
            raise ManifestError("quadratic model needs n and k")
        n, k = int(n), int(k)
        lam = np.ones((n - k, k)) if lam is None else np.asarray(lam, dtype=float)
        return ModelOperator.quadratic(QuadraticModel(n, k, lam.reshape(n - k, k)))
    raise ManifestError(f"unknown model {model!r}; known: {', '.join(MODEL_NAMES)}")


def model_spec(op: ModelOperator) -> BlockPolySpec:
    """Block layout of the invariant polynomial attached to an operator."""
    if op.kind == ModelKind.MOMENT_CURVE:
        return moment_curve_spec(op.n)
    if op.kind == ModelKind.QUADRATIC:
        return quadratic_model_spec(op.model)
    return max_codim_spec(op.k)


def model_maps(op: ModelOperator, params: Sequence[float]) -> list[np.ndarray]:
    """Left derivative matrices at the points gamma(0, t_j) of the fiber through the origin.

    ``params`` holds one parameter t_j in R^k per map, flattened.
    """
    m = model_spec(op).m
    params = np.asarray(params, dtype=float).ravel()
    if params.size != m * op.k:
        raise ManifestError(
            f"expected {m * op.k} parameters ({m} points of R^{op.k}), got {params.size}"
        )
    ts = params.reshape(m, op.k)
    if op.kind == ModelKind.MOMENT_CURVE:
        return [moment_curve_pi(float(t[0]), op.n) for t in ts]
    if op.kind == ModelKind.MAX_CODIM:
        return [max_codim_pi(t, op.k) for t in ts]
    origin = np.zeros(op.n)
    return [left_derivative_matrix(op.model, origin, op.graph_points(origin, t)) for t in ts]


def polynomial_space(degree: int, points: int) -> SampleSpace:
    """Monomials 1, x, ..., x^(degree-1) on a uniform grid of [0, 1] with equal weights."""
    if degree < 1 or points < degree:
        raise ManifestError(f"need 1 <= degree <= points, got degree={degree}, points={points}")
    grid = np.linspace(0.0, 1.0, points)
    basis = np.vander(grid, degree, increasing=True)
    return SampleSpace(points=grid, weights=np.full(points, 1.0 / points), basis=basis)


def right_inverse(jac: np.ndarray) -> np.ndarray:
    """D^T (D D^T)^-1, the minimal right inverse of a full-row-rank derivative."""
    return jac.T @ np.linalg.inv(jac @ jac.T)


def named_problem(
    name: str, x0: Sequence[float], r: float, c: float, big_c: float = 0.0
) -> NewtonProblem:
    """Scalar problems on R^2 with R taken as the right inverse of D phi at x0."""
    x0 = np.asarray(x0, dtype=float)
    if name == "parabola-zero":

        def phi(x):
            return np.array([x[1] - x[0] ** 2])

        def jac(x):
            return np.array([[-2.0 * x[0], 1.0]])

    elif name == "sine":

        def phi(x):
            return np.array([x[1] - np.sin(x[0] * x[1]) - 0.3])

        def jac(x):
            cos = np.cos(x[0] * x[1])
            return np.array([[-x[1] * cos, 1.0 - x[0] * cos]])

    else:
        raise ManifestError(f"unknown problem {name!r}; known: {', '.join(PROBLEM_NAMES)}")
    return NewtonProblem(phi=phi, x0=x0, r=r, R=right_inverse(jac(x0)), c=c, C=big_c, jac=jac)


def incidence_problem(
    op: ModelOperator, x0: Sequence[float], y: Sequence[float], r: float, c: float, big_c=0.0
) -> NewtonProblem:
    """phi = rho(., y) for the operator's defining function, R the right inverse at x0."""
    inc = op.incidence()
    x0 = np.asarray(x0, dtype=float)
    y = np.asarray(y, dtype=float)
    return NewtonProblem(
        phi=lambda x: inc.value(x, y),
        x0=x0,
        r=r,
        R=right_inverse(inc.left(x0, y)),
        c=c,
        C=big_c,
        jac=lambda x: inc.left(x, y),
    )
