from radonbl.database import crud


def test_create_and_finish_run():
    run = crud.create_run("bl", "compute", 2**64 - 1, {"datum": "parabola", "tol": 1e-9})
    assert run.id is not None
    assert run.status == "running"

    done = crud.finish_run(run.id, "succeeded", 0, summary="BL^-1 = 1", artifact_path="/tmp/a.json")
    assert done.exit_code == 0
    assert done.finished_at is not None

    stored = crud.get_run_by_id(run.id)
    assert stored.seed == str(2**64 - 1)
    assert stored.parameter_dict == {"datum": "parabola", "tol": 1e-9}
    assert stored.summary == "BL^-1 = 1"


def test_finish_unknown_run():
    assert crud.finish_run(999, "failed", 2) is None


def test_recent_runs_newest_first():
    ids = [crud.create_run("poly", "eval", seed, {}).id for seed in range(3)]
    recent = crud.get_recent_runs(limit=2)
    assert [run.id for run in recent] == ids[::-1][:2]


def test_delete_run():
    run = crud.create_run("nonconc", "separate", 0, {})
    assert crud.delete_run(run.id)
    assert crud.get_run_by_id(run.id) is None
    assert not crud.delete_run(run.id)
