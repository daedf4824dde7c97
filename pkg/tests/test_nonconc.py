import itertools

import numpy as np
import pytest

from radonbl.core.datasets import polynomial_space
from radonbl.core.errors import BudgetExceededError, EmptySpaceError, ShapeError
from radonbl.core.nonconc import (
    QuadraticModel,
    SampleSpace,
    convprop_construct,
    density_K,
    derivative_identity_check,
    minor_condition,
    mustbebig_slack,
    separated_points,
    vandermonde_nonconcentration,
)
from radonbl.utils.helpers import spawn_rng


def test_sample_space_validation():
    with pytest.raises(EmptySpaceError):
        SampleSpace(points=np.zeros(0), weights=np.zeros(0), basis=np.zeros((0, 1)))
    with pytest.raises(ShapeError):
        SampleSpace(points=np.arange(3.0), weights=-np.ones(3), basis=np.ones((3, 1)))
    with pytest.raises(ShapeError):
        SampleSpace(points=np.arange(3.0), weights=np.ones(3), basis=np.ones((3, 2)))


def test_sample_space_json_round_trip():
    space = polynomial_space(3, 10)
    back = SampleSpace.from_json(space.to_json())
    np.testing.assert_array_equal(back.basis, space.basis)
    assert back.total_mass == pytest.approx(1.0)


@pytest.mark.parametrize("degree, points, delta", [(1, 20, 0.2), (3, 50, 0.1), (4, 40, 0.3)])
def test_convprop_polynomial_spaces(degree, points, delta):
    space = polynomial_space(degree, points)
    cert = convprop_construct(space, delta, seed=0)
    assert cert.check(space)
    assert cert.selected_mass(space) >= (1 - delta) * space.total_mass * (1 - 1e-12)
    rng = spawn_rng(0, 1)
    for _ in range(50):
        assert mustbebig_slack(space, cert, rng.standard_normal(space.d)) >= 1.0 - 1e-9


def test_convprop_random_weights():
    rng = spawn_rng(21)
    points = np.sort(rng.random(60))
    weights = rng.random(60)
    basis = np.vander(points, 3, increasing=True)
    space = SampleSpace(points=points, weights=weights, basis=basis)
    cert = convprop_construct(space, 0.2, seed=3)
    assert cert.check(space)
    assert len(cert.witness_functions) == 3


def test_convprop_small_support_function():
    points = np.arange(20.0)
    basis = np.column_stack([np.ones(20), (points == 0).astype(float)])
    space = SampleSpace(points=points, weights=np.full(20, 0.05), basis=basis)
    cert = convprop_construct(space, 0.5, seed=0)
    assert cert.j0 == 1
    assert 0 not in cert.selected_indices.tolist()
    assert cert.check(space)


def test_convprop_rejects_bad_delta():
    space = polynomial_space(2, 10)
    for delta in (0.0, 1.0):
        with pytest.raises(ValueError):
            convprop_construct(space, delta)


def test_separated_points_unit_interval():
    points, product, guarantee = vandermonde_nonconcentration([(0.0, 1.0)], 3)
    assert points == pytest.approx([0.1, 0.5, 0.9])
    assert product == pytest.approx(0.128)
    assert guarantee == pytest.approx(0.008)
    assert product >= guarantee


def test_separated_points_union():
    intervals = [(0.0, 1.0), (2.0, 3.0)]
    points = separated_points(intervals, 2)
    assert len(points) == 2
    assert abs(points[0] - points[1]) >= 2.0 / 3.0 - 1e-12
    for t in points:
        assert any(a <= t <= b for a, b in intervals)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_vandermonde_guarantee_on_scattered_sets(n):
    intervals = [(0.0, 0.3), (0.5, 0.55), (0.9, 1.4)]
    points, product, guarantee = vandermonde_nonconcentration(intervals, n)
    separation = 0.85 / (2 * n - 1)
    for a, b in itertools.combinations(points, 2):
        assert abs(a - b) >= separation - 1e-12
    assert product >= guarantee * (1 - 1e-12)


def test_separated_points_errors():
    with pytest.raises(EmptySpaceError):
        separated_points([(1.0, 1.0)], 2)
    with pytest.raises(ValueError):
        separated_points([(0.0, 1.0)], 0)


def test_quadratic_model_validation():
    with pytest.raises(ShapeError):
        QuadraticModel(5, 2, np.ones((3, 2)))
    with pytest.raises(ShapeError):
        QuadraticModel(3, 2, np.ones((2, 2)))


def test_density_codim_one():
    model = QuadraticModel(3, 2, np.array([[1.0, 2.0]]))
    assert minor_condition(model) == pytest.approx([1.0, 2.0])
    assert density_K(model) == pytest.approx(2.0)


def test_density_identity_lambda():
    model = QuadraticModel(4, 2, np.eye(2))
    assert minor_condition(model) == pytest.approx([1.0, -1.0])
    assert density_K(model) == pytest.approx(1.0)


def test_density_vanishes_with_minor():
    model = QuadraticModel(3, 2, np.array([[0.0, 2.0]]))
    assert density_K(model) == 0.0


@pytest.mark.parametrize("k, c", [(2, 1), (3, 1), (2, 2)])
def test_derivative_identity(k, c):
    rng = spawn_rng(31, k, c)
    model = QuadraticModel(k + c, k, rng.standard_normal((c, k)))
    u = np.triu(rng.standard_normal((k, k))) + np.eye(k)
    base = rng.standard_normal(k)
    assert derivative_identity_check(model, u, base) <= 1e-8


@pytest.mark.parametrize("k, c", [(2, 1), (2, 2)])
def test_derivative_identity_lower_order_vanishes(k, c):
    rng = spawn_rng(32, k, c)
    model = QuadraticModel(k + c, k, rng.standard_normal((c, k)))
    u = np.triu(rng.standard_normal((k, k))) + np.eye(k)
    orders = [c] * k
    orders[0] -= 1
    assert derivative_identity_check(model, u, np.zeros(k), orders) <= 1e-8


def test_derivative_identity_budget_and_shape():
    model = QuadraticModel(6, 3, np.ones((3, 3)))
    with pytest.raises(BudgetExceededError):
        derivative_identity_check(model, np.eye(3), np.zeros(3))
    small = QuadraticModel(3, 2, np.ones((1, 2)))
    with pytest.raises(ShapeError):
        derivative_identity_check(small, np.ones((2, 2)), np.zeros(2))
