import numpy as np
import pytest

from radonbl.core.errors import NotPositiveDefiniteError, NotSymmetricError, ShapeError
from radonbl.core.linops import (
    as_matrix,
    cofactor_det,
    det,
    hs_norm,
    linf_operator_norm,
    random_sl,
    spd_inverse_sqrt,
    spd_sqrt,
    sym_eigh,
    upper_triangularize,
)
from radonbl.utils.helpers import spawn_rng


def test_det_small_cases():
    assert det(np.eye(3)) == 1.0
    assert det([[0, 1], [1, 0]]) == -1.0


def test_det_matches_cofactor_oracle():
    m = np.random.default_rng(7).standard_normal((6, 6))
    expected = cofactor_det(m)
    assert det(m) == pytest.approx(expected, rel=1e-10)


def test_det_rejects_non_square_and_non_finite():
    with pytest.raises(ShapeError):
        det(np.ones((2, 3)))
    with pytest.raises(ShapeError):
        det([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(ShapeError):
        as_matrix(np.ones((2, 2, 2)))


def test_spd_inverse_sqrt():
    np.testing.assert_allclose(spd_inverse_sqrt(np.eye(3)), np.eye(3), atol=1e-14)
    np.testing.assert_allclose(spd_inverse_sqrt(np.diag([4.0, 9.0])), np.diag([0.5, 1 / 3]))

    a = np.random.default_rng(1).standard_normal((5, 5))
    m = a @ a.T + 0.5 * np.eye(5)
    s = spd_inverse_sqrt(m)
    np.testing.assert_allclose(s @ m @ s, np.eye(5), atol=1e-9)
    np.testing.assert_allclose(s, s.T)


def test_spd_inverse_sqrt_errors():
    with pytest.raises(NotSymmetricError):
        spd_inverse_sqrt([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(NotPositiveDefiniteError) as info:
        spd_inverse_sqrt(np.diag([1.0, -1.0]))
    assert info.value.smallest_eigenvalue == pytest.approx(-1.0)


def test_spd_sqrt_squares_back():
    a = np.random.default_rng(2).standard_normal((4, 4))
    m = a @ a.T
    root = spd_sqrt(m)
    np.testing.assert_allclose(root @ root, m, atol=1e-10)


def test_sym_eigh_ascending_orthonormal():
    m = np.array([[2.0, 1.0], [1.0, 2.0]])
    w, v = sym_eigh(m)
    np.testing.assert_allclose(w, [1.0, 3.0])
    np.testing.assert_allclose(v.T @ v, np.eye(2), atol=1e-14)


def test_norms():
    assert hs_norm(np.eye(4)) == pytest.approx(2.0)
    assert hs_norm([[3.0, 4.0]]) == pytest.approx(5.0)
    assert hs_norm(np.zeros((2, 2))) == 0.0
    assert linf_operator_norm([[1.0, -2.0], [3.0, 4.0]]) == 7.0


def test_random_sl_has_unit_determinant():
    for seed in range(10):
        a = random_sl(spawn_rng(seed), 4)
        assert det(a) == pytest.approx(1.0, abs=1e-10)


def test_triangularize_trivial_cases():
    result = upper_triangularize([[5.0]])
    np.testing.assert_array_equal(result.E, [[1.0]])

    t = np.triu(np.arange(1.0, 10.0).reshape(3, 3))
    result = upper_triangularize(t)
    np.testing.assert_allclose(result.E, np.eye(3))
    assert result.entry_sum == 3.0


def test_triangularize_swap():
    t = np.array([[0.0, 1.0], [1.0, 0.0]])
    result = upper_triangularize(t)
    assert np.allclose(np.tril(t @ result.E, -1), 0.0)
    assert det(result.E) == pytest.approx(1.0)
    assert result.entry_sum <= 3.0


@pytest.mark.parametrize("d", range(1, 9))
def test_triangularize_random(d):
    for seed in range(25):
        t = spawn_rng(seed, d).standard_normal((d, d))
        result = upper_triangularize(t)
        product = t @ result.E
        assert np.max(np.abs(np.tril(product, -1))) <= 1e-9 * max(1.0, np.max(np.abs(t)))
        np.testing.assert_allclose(result.U, np.triu(product))
        assert abs(det(result.E) - 1.0) <= 1e-9
        assert result.entry_sum <= 2**d - 1 + 1e-9
