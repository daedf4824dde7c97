from fractions import Fraction

import numpy as np
import pytest

from radonbl.core import config
from radonbl.core.bl_core import (
    STATUS_CONVERGED,
    STATUS_ZERO_WEIGHT,
    BLDatum,
    EqualExpDatum,
    bl_constant_alternating,
    bl_constant_gaussian,
    bl_weight_root,
    check_scaling_identity,
    gaussian_objective,
    min_vector_objective,
    witness_spd_params,
)
from radonbl.core.datasets import named_datum
from radonbl.core.errors import (
    DeterminantConstraintError,
    NotPositiveDefiniteError,
    ScalingConditionError,
    ShapeError,
)
from radonbl.utils.helpers import spawn_rng


def _loomis_whitney(n: int) -> BLDatum:
    return named_datum(f"loomis-whitney-{n}d").to_bl_datum()


def test_datum_validation():
    with pytest.raises(ScalingConditionError):
        BLDatum(2, (1, 1), (Fraction(1, 2), Fraction(1, 2)), (np.eye(2)[:1], np.eye(2)[1:]))
    with pytest.raises(ShapeError):
        BLDatum(2, (1,), (1,), (np.eye(2),))
    with pytest.raises(ScalingConditionError):
        BLDatum(1, (1,), (Fraction(2),), (np.eye(1),))


def test_datum_json_round_trip_keeps_rationals():
    d = _loomis_whitney(3)
    back = BLDatum.from_json(d.to_json())
    assert back.exps == (Fraction(1, 2),) * 3
    for a, b in zip(d.maps, back.maps):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("solver", [bl_constant_alternating, bl_constant_gaussian])
def test_loomis_whitney_constant_is_one(n, solver):
    result = solver(_loomis_whitney(n))
    assert result.converged
    assert result.value == pytest.approx(1.0, abs=1e-6)


def test_gaussian_objective_at_identity():
    d = _loomis_whitney(3)
    assert gaussian_objective(d, [np.eye(2)] * 3) == pytest.approx(1.0)
    with pytest.raises(NotPositiveDefiniteError):
        gaussian_objective(d, [np.eye(2), np.eye(2), -np.eye(2)])


def test_min_vector_objective_requires_unit_determinants():
    d = _loomis_whitney(2)
    assert min_vector_objective(d, [np.eye(1), np.eye(1)], np.eye(2)) == pytest.approx(1.0)
    with pytest.raises(DeterminantConstraintError):
        min_vector_objective(d, [np.eye(1), np.eye(1)], 2 * np.eye(2))


def test_alternating_witness_reproduces_value():
    d = _loomis_whitney(3)
    result = bl_constant_alternating(d)
    a_list, a = list(result.witness[:-1]), result.witness[-1]
    assert min_vector_objective(d, a_list, a) == pytest.approx(result.value, rel=1e-6)
    xs = witness_spd_params(d, a)
    assert gaussian_objective(d, xs) == pytest.approx(result.value, rel=1e-6)


def test_degenerate_datum_reports_zero_weight():
    row = np.array([[1.0, 0.0]])
    d = BLDatum(2, (1, 1), (1, 1), (row, row))
    result = bl_constant_alternating(d)
    assert result.status == STATUS_ZERO_WEIGHT
    assert not result.converged
    assert result.value < config.SEMISTABLE_FLOOR


def test_alternating_validates_arguments():
    with pytest.raises(ValueError):
        bl_constant_alternating(_loomis_whitney(2), tol=0.0)
    with pytest.raises(ValueError):
        bl_constant_alternating(_loomis_whitney(2), max_iters=0)


def test_formulations_agree_on_random_data():
    for seed in range(3):
        rng = spawn_rng(seed)
        d = EqualExpDatum(3, 2, tuple(rng.standard_normal((1, 3)) for _ in range(3)))
        alternating = bl_constant_alternating(d.to_bl_datum())
        gaussian = bl_constant_gaussian(d.to_bl_datum())
        assert alternating.status == STATUS_CONVERGED
        assert gaussian.value == pytest.approx(alternating.value, rel=1e-4)


def test_two_lines_weight_root_is_determinant():
    maps = (np.array([[0.0, 1.0]]), np.array([[2.0, 1.0]]))
    result = bl_weight_root(EqualExpDatum(2, 1, maps))
    assert result.value == pytest.approx(2.0, rel=1e-6)


def test_scaling_identity_loomis_whitney():
    d = named_datum("loomis-whitney-2d")
    assert check_scaling_identity(d, [np.array([[2.0]]), np.array([[3.0]])]) <= 1e-4


def test_scaling_identity_rejects_singular_factor():
    d = named_datum("loomis-whitney-2d")
    with pytest.raises(ShapeError):
        check_scaling_identity(d, [np.array([[0.0]]), np.array([[1.0]])])
