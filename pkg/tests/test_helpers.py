from fractions import Fraction

import numpy as np
import pytest

from radonbl.core import config
from radonbl.core.datasets import (
    NAMED_DATA,
    build_operator,
    model_maps,
    model_spec,
    named_datum,
    named_problem,
    polynomial_space,
)
from radonbl.core.errors import ManifestError
from radonbl.core.invariant_poly import eval_phi
from radonbl.utils.helpers import (
    format_duration,
    fraction_from_json,
    fraction_to_json,
    parse_count,
    parse_intervals,
    parse_matrix,
    spawn_rng,
    to_jsonable,
)


def test_spawn_rng_is_addressable():
    a = spawn_rng(5, 1, 2).random(4)
    b = spawn_rng(5, 1, 2).random(4)
    c = spawn_rng(5, 2, 1).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert spawn_rng(2**64 - 1).random() != spawn_rng(0).random()


def test_format_duration():
    assert format_duration(0.25) == "250ms"
    assert format_duration(12.34) == "12.3s"
    assert format_duration(125) == "2m 5s"
    assert format_duration(7260) == "2h 1m"


def test_fractions():
    assert fraction_to_json(Fraction(3, 2)) == ["3", "2"]
    assert fraction_from_json(["3", "2"]) == Fraction(3, 2)
    assert fraction_from_json("4/3") == Fraction(4, 3)
    assert fraction_from_json(1.5) == Fraction(3, 2)
    with pytest.raises(ValueError):
        fraction_from_json([1, 2, 3])


def test_parsers():
    np.testing.assert_array_equal(parse_matrix("1,0;0,1"), np.eye(2))
    assert parse_intervals("0,1;2,3") == [(0.0, 1.0), (2.0, 3.0)]
    assert parse_count("1e5") == 100000
    with pytest.raises(ValueError):
        parse_count("2.5")
    with pytest.raises(ValueError):
        parse_matrix("1,2;3")


def test_to_jsonable():
    payload = {"a": np.arange(2), "b": np.float64(0.5), "c": Fraction(1, 3), "d": np.bool_(True)}
    assert to_jsonable(payload) == {"a": [0, 1], "b": 0.5, "c": ["1", "3"], "d": True}


def test_data_dir_follows_environment(isolated_home):
    assert config.get_data_dir() == isolated_home / "home"
    assert config.get_run_logs_dir(3).is_dir()


@pytest.mark.parametrize("raw, expected", [("3", 3), ("0", 1), ("many", 1)])
def test_max_workers(monkeypatch, raw, expected):
    monkeypatch.setenv("RADONBL_THREADS", raw)
    assert config.get_max_workers() == expected


def test_tolerances_override(monkeypatch):
    monkeypatch.setenv("RADONBL_REL_TOL", "1e-6")
    monkeypatch.setenv("RADONBL_ABS_TOL", "oops")
    tol = config.get_tolerances()
    assert tol.rel_tol == 1e-6
    assert tol.abs_tol == config.Tolerances.abs_tol


@pytest.mark.parametrize("name", NAMED_DATA)
def test_named_data_satisfy_scaling(name):
    d = named_datum(name).to_bl_datum()
    assert sum(p * dim for p, dim in zip(d.exps, d.dims)) == d.n


def test_unknown_names():
    with pytest.raises(ManifestError):
        named_datum("moment-curve-n9")
    with pytest.raises(ManifestError):
        build_operator("cubic")
    with pytest.raises(ManifestError):
        named_problem("cubic", (0.0, 0.0), 0.1, 0.5)


def test_parabola_maps():
    op = build_operator("parabola")
    maps = model_maps(op, [0.0, 1.0])
    np.testing.assert_allclose(maps[0], [[1.0, 0.0]])
    np.testing.assert_allclose(maps[1], [[1.0, -1.0]])
    assert abs(eval_phi(model_spec(op), maps)) == pytest.approx(1.0)
    with pytest.raises(ManifestError):
        model_maps(op, [0.0])


def test_polynomial_space():
    space = polynomial_space(3, 5)
    assert space.d == 3
    assert space.total_mass == pytest.approx(1.0)
    with pytest.raises(ManifestError):
        polynomial_space(4, 3)
