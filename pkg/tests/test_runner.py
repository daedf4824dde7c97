import json

import pytest

from radonbl.core.manifest import Manifest
from radonbl.core.runner import ExperimentRunner, RunStatus
from radonbl.database import crud


@pytest.fixture
def runner():
    return ExperimentRunner()


def test_successful_run_is_recorded(runner, tmp_path):
    events = []
    runner.on_status_changed = lambda run_id, status: events.append(status)
    output = tmp_path / "out" / "vandermonde.json"
    manifest = Manifest("poly", "vandermonde", {"n": 3, "t": "0,1,2"}, output_path=str(output))

    outcome = runner.run(manifest)

    assert outcome.exit_code == 0
    assert outcome.summary == "|Phi| = 12"
    assert events == [RunStatus.RUNNING, RunStatus.SUCCEEDED]
    assert runner.get_status(outcome.run_id) == RunStatus.SUCCEEDED

    document = json.loads(output.read_text(encoding="utf-8"))
    assert "generated" in document
    assert document["manifest"]["command"] == "poly"
    assert document["value"] == pytest.approx(12.0)

    record = crud.get_run_by_id(outcome.run_id)
    assert record.status == "succeeded"
    assert record.exit_code == 0
    assert record.artifact_path == str(output)
    log_text = open(record.log_path, encoding="utf-8").read()
    assert "[Runner] poly vandermonde seed=0" in log_text


def test_default_artifact_location(runner, isolated_home):
    manifest = Manifest("nonconc", "density-k", {"n": 3, "k": 2, "lambda": "1,2"}, seed=4)
    outcome = runner.run(manifest, ledger=False)
    assert outcome.exit_code == 0
    assert outcome.run_id < 0
    expected = isolated_home / "home" / "artifacts" / "nonconc_density-k_4.json"
    assert outcome.artifacts == [expected]
    assert expected.is_file()
    assert crud.get_recent_runs() == []


def test_numerical_failure_exits_2(runner):
    manifest = Manifest("ift", "solve", {"model": "parabola-zero", "x0": "0,1", "r": 0.1})
    outcome = runner.run(manifest)
    assert outcome.exit_code == 2
    assert outcome.summary.startswith("numerical failure")
    assert runner.get_status(outcome.run_id) == RunStatus.FAILED


def test_usage_error_exits_1(runner):
    outcome = runner.run(Manifest("bl", "compute", {"datum": "no-such-datum"}))
    assert outcome.exit_code == 1
    assert "unknown datum" in outcome.summary
    assert crud.get_run_by_id(outcome.run_id).status == RunStatus.ERROR.value


def test_iteration_budget_exits_2(runner):
    outcome = runner.run(Manifest("bl", "compute", {"datum": "loomis-whitney-3d", "max_iters": 1}))
    assert outcome.exit_code == 2
    assert "max_iters" in outcome.summary


def test_summary_callback(runner):
    seen = []
    runner.on_summary = lambda run_id, summary: seen.append(summary)
    manifest = Manifest("nonconc", "separate", {"intervals": "0,1", "n": 3})
    outcome = runner.run(manifest, ledger=False)
    assert seen == [outcome.summary]
    assert outcome.exit_code == 0


@pytest.mark.parametrize(
    "command, action, parameters",
    [
        ("bl", "verify-scaling", {"datum": "loomis-whitney-2d", "trials": 2}),
        ("poly", "invariance", {"model": "moment", "n": 3, "t": "0,1,2", "trials": 5}),
        ("poly", "contraction", {"partition_i": "0,1;2,3", "partition_j": "0,2;1,3"}),
        ("nonconc", "convprop", {"degree": 3, "points": 30, "delta": 0.2, "checks": 20}),
        ("nonconc", "derivative-id", {"n": 3, "k": 2, "lambda": "1,2"}),
        ("radon", "apply", {"model": "parabola", "box_lo": "0,-1", "box_hi": "0.25,1"}),
        ("ift", "solve", {"model": "sine"}),
        ("ift", "normalize", {"model": "moment", "n": 3}),
    ],
)
def test_actions_succeed(runner, command, action, parameters):
    outcome = runner.run(Manifest(command, action, parameters), ledger=False)
    assert outcome.exit_code == 0, outcome.summary
    assert len(outcome.artifacts) == 1
