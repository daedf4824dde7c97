import numpy as np
import pytest

from radonbl.core.bl_core import EqualExpDatum, bl_weight_root
from radonbl.core.errors import BudgetExceededError, PlacementError, ShapeError
from radonbl.core.invariant_poly import (
    BlockPolySpec,
    Placement,
    check_homogeneity,
    check_sl_invariance,
    contraction_identity_check,
    estimate_phi_norm,
    eval_phi,
    max_codim_pi,
    max_codim_spec,
    moment_curve_pi,
    moment_curve_spec,
    phi_norm_upper_bound,
    quadratic_model_matrix,
    quadratic_model_spec,
    render_zero_pattern,
    weight_lower_bound,
)
from radonbl.core.nonconc import QuadraticModel
from radonbl.utils.helpers import spawn_rng


def _moment_maps(ts, n):
    return [moment_curve_pi(t, n) for t in ts]


def test_moment_curve_vandermonde():
    value = eval_phi(moment_curve_spec(3), _moment_maps([0.0, 1.0, 2.0], 3))
    assert abs(value) == pytest.approx(12.0, abs=1e-9)


def test_moment_curve_repeated_parameter_vanishes():
    assert eval_phi(moment_curve_spec(3), _moment_maps([0.5, 0.5, 2.0], 3)) == pytest.approx(0.0)


def test_zero_pattern():
    assert render_zero_pattern(moment_curve_spec(3)) == "0.\n.1\n22"


def test_spec_json_round_trip():
    spec = quadratic_model_spec(QuadraticModel(4, 2, np.eye(2)))
    assert BlockPolySpec.from_json(spec.to_json()) == spec


def test_placement_validation():
    with pytest.raises(PlacementError):
        # ns = 3 is not a multiple of the block height 2
        BlockPolySpec(n=3, k=1, m=1, s=1, placements=(Placement(0, 0, 0),))
    with pytest.raises(PlacementError):
        BlockPolySpec(n=2, k=1, m=2, s=1, placements=(Placement(0, 0, 0), Placement(0, 0, 0)))
    with pytest.raises(PlacementError):
        BlockPolySpec(n=2, k=1, m=2, s=1, placements=(Placement(0, 0, 0), Placement(0, 1, 0)))


def test_max_codim_k1():
    maps = [max_codim_pi([y], 1) for y in (0.0, 1.0)]
    assert abs(eval_phi(max_codim_spec(1), maps)) == pytest.approx(1.0)


def test_max_codim_pi_layout():
    pi = max_codim_pi([2.0, 3.0], 2)
    assert pi.shape == (4, 6)
    np.testing.assert_array_equal(pi[:, :2], [[2, 0], [3, 0], [0, 2], [0, 3]])
    np.testing.assert_array_equal(pi[:, 2:], np.eye(4))
    with pytest.raises(ShapeError):
        max_codim_pi([1.0], 2)


def test_quadratic_spec_codim_one_is_stacked_determinant():
    model = QuadraticModel(3, 2, np.array([[1.0, 2.0]]))
    spec = quadratic_model_spec(model)
    maps = [spawn_rng(5, j).standard_normal((1, 3)) for j in range(3)]
    assert eval_phi(spec, maps) == pytest.approx(np.linalg.det(np.vstack(maps)), rel=1e-12)


def test_quadratic_layouts_agree_up_to_sign():
    model = QuadraticModel(4, 2, np.eye(2))
    spec = quadratic_model_spec(model)
    maps = [spawn_rng(8, j).standard_normal((2, 4)) for j in range(4)]
    layout = abs(eval_phi(spec, maps))
    blocks = abs(np.linalg.det(quadratic_model_matrix(2, 2, maps)))
    assert layout == pytest.approx(blocks, rel=1e-10)


def test_homogeneity_and_invariance():
    spec = moment_curve_spec(3)
    maps = _moment_maps([0.0, 1.0, 2.0], 3)
    assert check_homogeneity(spec, maps, [2.0, 2.0, 2.0]) <= 1e-9
    assert check_homogeneity(spec, maps, [0.5, 3.0, 1.5]) <= 1e-9
    assert check_sl_invariance(spec, maps, seed=0, trials=20) <= 1e-8


def test_invariance_quadratic_model():
    model = QuadraticModel(4, 2, np.array([[1.0, 2.0], [3.0, 1.0]]))
    spec = quadratic_model_spec(model)
    maps = [spawn_rng(11, j).standard_normal((2, 4)) for j in range(4)]
    assert check_sl_invariance(spec, maps, seed=4, trials=20) <= 1e-8


def test_phi_norm_single_block():
    spec = BlockPolySpec(n=2, k=0, m=1, s=1, placements=(Placement(0, 0, 0),))
    assert phi_norm_upper_bound(spec) == pytest.approx(0.5)
    estimate = estimate_phi_norm(spec, seed=0, budget=300)
    assert 0.45 <= estimate <= 0.5 + 1e-9


def test_phi_norm_estimate_is_monotone_in_budget():
    spec = moment_curve_spec(3)
    small = estimate_phi_norm(spec, seed=2, budget=64)
    large = estimate_phi_norm(spec, seed=2, budget=512)
    assert large >= small
    assert large <= phi_norm_upper_bound(spec) + 1e-9


def test_weight_lower_bound_below_weight():
    spec = moment_curve_spec(2)
    maps = _moment_maps([0.0, 1.0], 2)
    assert eval_phi(spec, maps) == pytest.approx(-2.0)
    weight = bl_weight_root(EqualExpDatum(2, 1, tuple(maps))).value
    assert weight == pytest.approx(2.0, rel=1e-6)
    bound = weight_lower_bound(spec, maps, phi_norm_upper_bound(spec))
    assert bound == pytest.approx(2.0)
    assert bound <= weight * (1 + 1e-6)


def test_weight_lower_bound_rejects_bad_norm():
    spec = moment_curve_spec(2)
    with pytest.raises(ValueError):
        weight_lower_bound(spec, _moment_maps([0.0, 1.0], 2), 0.0)


def test_contraction_single_index():
    gap = contraction_identity_check([np.array([[3.0]])], [[0]], [[0]])
    assert gap == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize(
    "partition_i, partition_j",
    [
        ([[0, 1]], [[0, 1]]),
        ([[0, 1], [2, 3]], [[0, 2], [1, 3]]),
        ([[0], [1], [2]], [[0, 1, 2]]),
        ([[0, 1, 2], [3, 4, 5]], [[0, 3, 4], [1, 2, 5]]),
    ],
)
def test_contraction_matches_polarization(partition_i, partition_j):
    size = sum(len(g) for g in partition_i)
    width = len(partition_j[0])
    rows = {lam: len(g) for g in partition_i for lam in g}
    rng = spawn_rng(17, size)
    family = [rng.standard_normal((rows[lam], width)) for lam in range(size)]
    assert contraction_identity_check(family, partition_i, partition_j) <= 1e-9


def test_contraction_budget():
    family = [np.ones((1, 9)) for _ in range(9)]
    with pytest.raises(BudgetExceededError):
        contraction_identity_check(family, [[i] for i in range(9)], [list(range(9))])
