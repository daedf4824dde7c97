import numpy as np
import pytest

from radonbl.core.datasets import build_operator, named_problem
from radonbl.core.errors import (
    ContractionBoundError,
    NotPositiveDefiniteError,
    NumericalFailure,
    PreconditionError,
    ShapeError,
)
from radonbl.core.ift_newton import (
    IncidenceModel,
    NewtonProblem,
    central_difference,
    fiber_measure_lower_bound,
    kappa_n,
    newton_solve,
    normalize_defining_function,
    normalized_fiber_measure,
    sampled_transverse_bound,
)
from radonbl.core.radon_lab import ModelOperator, model_zero_points
from radonbl.utils.helpers import spawn_rng


def _parabola_problem(x0, r=0.5, c=0.0, big_c=0.0):
    return NewtonProblem(
        phi=lambda x: np.array([x[1] - x[0] ** 2]),
        x0=np.asarray(x0, dtype=float),
        r=r,
        R=np.array([[0.0], [1.0]]),
        c=c,
        C=big_c,
    )


def test_central_difference_matches_analytic():
    jac = central_difference(lambda x: np.array([x[0] * x[1], np.sin(x[0])]), np.array([0.3, 2.0]))
    np.testing.assert_allclose(jac, [[2.0, 0.3], [np.cos(0.3), 0.0]], atol=1e-8)


def test_problem_validation():
    with pytest.raises(ValueError):
        _parabola_problem([0.0, 0.1], c=1.0)
    with pytest.raises(ValueError):
        _parabola_problem([0.0, 0.1], r=0.0)
    with pytest.raises(ShapeError):
        NewtonProblem(lambda x: np.array([x[0]]), np.zeros(2), 1.0, np.ones((3, 1)), 0.0)


def test_problem_accepts_transposed_right_inverse():
    p = NewtonProblem(lambda x: np.array([x[1]]), np.zeros(2), 1.0, np.array([[0.0, 1.0]]), 0.0)
    assert p.R.shape == (2, 1)


def test_single_newton_step():
    root, cert = newton_solve(_parabola_problem([0.0, 0.1]))
    np.testing.assert_allclose(root, [0.0, 0.0], atol=1e-15)
    assert cert.iterations == 1
    assert cert.distance == pytest.approx(0.1)
    assert cert.distance_bound == pytest.approx(0.1)
    assert cert.converged


def test_sine_problem_converges_geometrically():
    p = named_problem("sine", (0.2, 0.35), 0.1, 0.5)
    root, cert = newton_solve(p)
    assert abs(p.value(root)[0]) <= 1e-12
    assert cert.distance <= cert.distance_bound
    for j, res in enumerate(cert.residuals):
        assert res <= (0.5 + 1e-9) ** j * cert.residuals[0] + 1e-15


def test_contraction_claim_is_checked():
    p = named_problem("sine", (0.2, 0.35), 0.1, 0.01)
    with pytest.raises(ContractionBoundError):
        newton_solve(p)


def test_precondition_far_from_zero_set():
    p = named_problem("parabola-zero", (0.0, 1.0), 0.1, 0.0)
    with pytest.raises(PreconditionError):
        newton_solve(p)


def test_iteration_budget():
    p = named_problem("sine", (0.2, 0.35), 0.1, 0.5)
    with pytest.raises(NumericalFailure):
        newton_solve(p, max_iters=1, tol=1e-30)


def test_flat_fiber_measure():
    p = NewtonProblem(lambda x: np.array([x[1]]), np.zeros(2), 1.0, np.array([[0.0], [1.0]]), 0.0)
    result = fiber_measure_lower_bound(p, grid=4)
    assert result.measure == pytest.approx(1.0)
    assert result.guaranteed_bound == pytest.approx(0.5)
    assert result.holds
    assert result.roots.shape == (4, 2)
    np.testing.assert_allclose(result.roots[:, 1], 0.0, atol=1e-15)


def test_sine_fiber_measure():
    baseline = named_problem("sine", (0.2, 0.375), 0.1, 0.5)
    big_c = 1.1 * sampled_transverse_bound(baseline) + 1e-12
    p = named_problem("sine", (0.2, 0.375), 0.1, 0.5, big_c)
    result = fiber_measure_lower_bound(p, grid=8)
    assert result.holds
    assert result.measure >= result.guaranteed_bound
    for root in result.roots:
        assert abs(p.value(root)[0]) <= 1e-10


def test_fiber_precondition_is_stricter_than_solve():
    p = named_problem("sine", (0.2, 0.35), 0.1, 0.5, 10.0)
    newton_solve(p)
    with pytest.raises(PreconditionError):
        fiber_measure_lower_bound(p, grid=4)


def test_fiber_transverse_claim_is_checked():
    p = named_problem("sine", (0.2, 0.375), 0.1, 0.5, 1e-6)
    with pytest.raises(ContractionBoundError):
        fiber_measure_lower_bound(p, grid=4)


def test_kappa():
    assert kappa_n(1) == pytest.approx(1 / 6)
    assert kappa_n(4) == pytest.approx(1 / 12)
    with pytest.raises(ValueError):
        kappa_n(0)


@pytest.mark.parametrize(
    "op",
    [
        ModelOperator.moment_curve(3),
        build_operator("quadratic", n=4, k=2),
        ModelOperator.max_codim(2),
    ],
)
def test_normalization_on_zero_set(op):
    inc = op.incidence()
    for x, y in model_zero_points(op, spawn_rng(12), 3, scale=0.5):
        result = normalize_defining_function(inc, x, y)
        assert result.gram_residual <= 1e-8
        assert result.det_ratio_residual <= 1e-8
        np.testing.assert_allclose(result.d_x @ result.d_x.T, np.eye(inc.codim), atol=1e-8)


def test_normalization_off_zero_set():
    inc = build_operator("parabola").incidence()
    result = normalize_defining_function(inc, [0.0, 0.3], [0.5, 0.125])
    assert result.gram_residual is None
    assert np.max(np.abs(result.value)) > 0


def test_normalization_rejects_degenerate_derivative():
    flat = IncidenceModel(
        rho=lambda x, y: np.array([y[0]]),
        d_x=lambda x, y: np.zeros((1, 2)),
        d_y=lambda x, y: np.array([[1.0, 0.0]]),
        n=2,
        codim=1,
    )
    with pytest.raises(NotPositiveDefiniteError):
        normalize_defining_function(flat, [0.0, 0.0], [0.0, 0.0])


def test_normalized_fiber_measure_parabola():
    op = build_operator("parabola")
    y = op.graph_points(np.zeros(2), np.array([0.5]))
    result = normalized_fiber_measure(op.incidence(), np.zeros(2), y, delta=0.1, grid=6)
    assert result.holds


def test_normalized_fiber_measure_precondition():
    op = build_operator("parabola")
    with pytest.raises(PreconditionError):
        normalized_fiber_measure(op.incidence(), np.zeros(2), [0.5, 1.0], delta=0.1, grid=4)
