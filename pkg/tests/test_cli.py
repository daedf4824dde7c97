import json

import pytest

from radonbl import __version__
from radonbl.main import build_parser, main


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out.strip()


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_unknown_flag_exits_1():
    with pytest.raises(SystemExit) as info:
        main(["poly", "vandermonde", "--bogus", "1"])
    assert info.value.code == 1


def test_missing_action_exits_1():
    with pytest.raises(SystemExit) as info:
        main(["poly"])
    assert info.value.code == 1


def test_parser_exposes_every_action():
    parser = build_parser()
    args = parser.parse_args(["radon", "knapp", "--model", "parabola", "--power-shift", "0.1"])
    assert args.power_shift == "0.1"
    args = parser.parse_args(["ift", "fiber", "--model", "sine", "--C", "2", "--c", "0.5"])
    assert (args.C, args.c) == ("2", "0.5")


def test_vandermonde(capsys):
    code, out = _run(capsys, "poly", "vandermonde", "--n", "3", "--t", "0,1,2")
    assert code == 0
    assert out == "|Phi| = 12"


def test_bl_compute_loomis_whitney(capsys):
    code, out = _run(capsys, "--no-ledger", "bl", "compute", "--datum", "loomis-whitney-3d")
    assert code == 0
    assert float(out.split()[2]) == pytest.approx(1.0, abs=1e-6)


def test_bl_compute_from_file(capsys, tmp_path):
    datum = {
        "n": 2,
        "dims": [1, 1],
        "exps": [["1", "1"], ["1", "1"]],
        "maps": [[1.0, 0.0], [1.0, 1.0]],
    }
    path = tmp_path / "datum.json"
    path.write_text(json.dumps(datum), encoding="utf-8")
    code, out = _run(capsys, "bl", "compute", "--datum-file", str(path), "--method", "gaussian")
    assert code == 0
    assert float(out.split()[2]) == pytest.approx(1.0, abs=1e-6)


def test_poly_eval_pattern(capsys):
    code, out = _run(
        capsys, "poly", "eval", "--model", "moment", "--n", "3", "--t", "0,1,2",
        "--budget", "64", "--pattern",
    )
    assert code == 0
    assert out.startswith("Phi = ")
    assert out.endswith("0.\n.1\n22")


def test_density_k(capsys):
    code, out = _run(capsys, "nonconc", "density-k", "--n", "3", "--k", "2", "--lambda", "1,2")
    assert code == 0
    assert out.startswith("K = 2,")


def test_ift_precondition_failure_exits_2(capsys):
    code, out = _run(
        capsys, "ift", "solve", "--model", "parabola-zero", "--x0", "0,1", "--r", "0.1"
    )
    assert code == 2
    assert out.startswith("numerical failure")


def test_knapp_then_regress(capsys, tmp_path):
    common = ["radon", "knapp", "--model", "parabola", "--samples", "1000", "--deltas",
              "0.5,0.25,0.125", "--seed", "3"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert _run(capsys, *common, "-o", str(first))[0] == 0
    assert _run(capsys, *common, "-o", str(second))[0] == 0
    assert first.read_text(encoding="utf-8").startswith("# generated")

    code, out = _run(capsys, "regress", str(first), str(second))
    assert code == 0
    assert out.startswith("no differences")


def test_regress_detects_changes(capsys, tmp_path):
    header = "# generated 2026-01-01T00:00:00\ndelta,ratio\n"
    baseline, current = tmp_path / "a.csv", tmp_path / "b.csv"
    baseline.write_text(header + "0.5,1.0\n", encoding="utf-8")
    current.write_text(header + "0.5,1.1\n", encoding="utf-8")
    code, out = _run(capsys, "regress", str(baseline), str(current))
    assert code == 2
    assert "column 'ratio'" in out
    assert _run(capsys, "regress", str(baseline), str(current), "--rtol", "inf")[0] == 0

    report = tmp_path / "report.json"
    _run(capsys, "regress", str(baseline), str(current), "-o", str(report))
    assert json.loads(report.read_text(encoding="utf-8"))["differences"]


def test_regress_schema_mismatch_exits_1(capsys, tmp_path):
    csv_path = tmp_path / "a.csv"
    csv_path.write_text("delta,ratio\n0.5,1.0\n", encoding="utf-8")
    json_path = tmp_path / "b.json"
    json_path.write_text("{}", encoding="utf-8")
    code, _ = _run(capsys, "regress", str(csv_path), str(json_path))
    assert code == 1


def test_run_manifest(capsys, tmp_path):
    manifest = {
        "command": "nonconc",
        "action": "separate",
        "parameters": {"intervals": [[0, 1]], "n": 3},
        "seed": 1,
        "output_path": str(tmp_path / "sep.json"),
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest), encoding="utf-8")
    code, out = _run(capsys, "run", str(path))
    assert code == 0
    assert out.startswith("prod |t_i - t_j|")
    assert (tmp_path / "sep.json").is_file()


def test_bad_manifest_exits_1(capsys, tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"command": "poly", "action": "eval", "seed": -3}), "utf-8")
    code, _ = _run(capsys, "run", str(path))
    assert code == 1


def test_history(capsys):
    _run(capsys, "poly", "vandermonde", "--n", "2", "--t", "0,1")
    code, out = _run(capsys, "history", "--limit", "5")
    assert code == 0
    assert "poly vandermonde" in out
    assert "exit=0" in out
