"""CRUD operations for the run ledger."""

import json
from datetime import datetime
from typing import Optional

from radonbl.database.database import get_session
from radonbl.database.models import ExperimentRun
from radonbl.utils.helpers import to_jsonable


def create_run(command: str, action: str, seed: int, parameters: dict) -> ExperimentRun:
    """Record a run that is about to start."""
    session = get_session()
    try:
        run = ExperimentRun(
            command=command,
            action=action,
            seed=str(seed),
            parameters=json.dumps(to_jsonable(parameters), sort_keys=True),
            status="running",
        )
        session.add(run)
        session.commit()
        session.refresh(run)
        return run
    finally:
        session.close()


def finish_run(
    run_id: int,
    status: str,
    exit_code: int,
    summary: Optional[str] = None,
    artifact_path: Optional[str] = None,
    log_path: Optional[str] = None
) -> Optional[ExperimentRun]:
    """Store the outcome of a run."""
    session = get_session()
    try:
        run = session.query(ExperimentRun).filter(ExperimentRun.id == run_id).first()
        if not run:
            return None

        run.status = status
        run.exit_code = exit_code
        run.finished_at = datetime.utcnow()
        if summary is not None:
            run.summary = summary
        if artifact_path is not None:
            run.artifact_path = artifact_path
        if log_path is not None:
            run.log_path = log_path

        session.commit()
        session.refresh(run)
        return run
    finally:
        session.close()


def get_run_by_id(run_id: int) -> Optional[ExperimentRun]:
    """Get a run by its ID."""
    session = get_session()
    try:
        return session.query(ExperimentRun).filter(ExperimentRun.id == run_id).first()
    finally:
        session.close()


def get_recent_runs(limit: int = 20) -> list[ExperimentRun]:
    """Most recent runs first."""
    session = get_session()
    try:
        return (
            session.query(ExperimentRun)
            .order_by(ExperimentRun.id.desc())
            .limit(limit)
            .all()
        )
    finally:
        session.close()


def delete_run(run_id: int) -> bool:
    """Delete a run by its ID."""
    session = get_session()
    try:
        run = session.query(ExperimentRun).filter(ExperimentRun.id == run_id).first()
        if not run:
            return False

        session.delete(run)
        session.commit()
        return True
    finally:
        session.close()
