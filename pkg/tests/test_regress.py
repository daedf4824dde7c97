import json

import pytest

from radonbl.core.errors import SchemaMismatchError
from radonbl.core.regress import regress
from radonbl.utils.helpers import write_csv, write_json

COLUMNS = ("delta", "ratio")


def _csv(path, rows):
    return write_csv(path, COLUMNS, rows)


def test_identical_csv(tmp_path):
    rows = [[0.5, 1.25], [0.25, 1.3]]
    report = regress(_csv(tmp_path / "a.csv", rows), _csv(tmp_path / "b.csv", rows))
    assert report.exit_code == 0
    assert report.compared == 4


def test_perturbed_csv(tmp_path, rng):
    rows = [[0.5, 1.25], [0.25, 1.3]]
    moved = [[0.5, 1.25], [0.25, 1.3 * (1 + 1e-6 + rng.random() * 1e-6)]]
    baseline, current = _csv(tmp_path / "a.csv", rows), _csv(tmp_path / "b.csv", moved)
    report = regress(baseline, current)
    assert report.exit_code == 2
    assert len(report.differences) == 1
    assert "column 'ratio'" in report.differences[0]
    assert regress(baseline, current, rtol=1e-3).exit_code == 0
    assert regress(baseline, current, rtol=float("inf")).exit_code == 0


def test_csv_schema_mismatch(tmp_path):
    baseline = _csv(tmp_path / "a.csv", [[0.5, 1.0]])
    other = write_csv(tmp_path / "b.csv", ("delta", "norm"), [[0.5, 1.0]])
    with pytest.raises(SchemaMismatchError):
        regress(baseline, other)
    shorter = _csv(tmp_path / "c.csv", [])
    with pytest.raises(SchemaMismatchError):
        regress(baseline, shorter)


def test_json_ignores_timestamp(tmp_path):
    payload = {"value": 1.0, "nested": {"list": [1, 2.5, "x"]}, "flag": True}
    a = write_json(tmp_path / "a.json", payload)
    b = tmp_path / "b.json"
    document = json.loads(a.read_text(encoding="utf-8"))
    document["generated"] = "1999-01-01T00:00:00"
    b.write_text(json.dumps(document), encoding="utf-8")
    assert regress(a, b).exit_code == 0


def test_json_differences(tmp_path):
    a = write_json(tmp_path / "a.json", {"value": 1.0, "status": "converged"})
    b = write_json(tmp_path / "b.json", {"value": 1.5, "status": "max_iters"})
    report = regress(a, b)
    assert report.exit_code == 2
    assert len(report.differences) == 2
    c = write_json(tmp_path / "c.json", {"value": 1.0})
    with pytest.raises(SchemaMismatchError):
        regress(a, c)


def test_file_type_and_existence(tmp_path):
    a = write_json(tmp_path / "a.json", {"value": 1.0})
    b = _csv(tmp_path / "b.csv", [[1.0, 2.0]])
    with pytest.raises(SchemaMismatchError):
        regress(a, b)
    with pytest.raises(FileNotFoundError):
        regress(a, tmp_path / "missing.json")
    with pytest.raises(ValueError):
        regress(a, a, rtol=-1.0)
