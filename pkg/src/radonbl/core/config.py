"""Application configuration, paths and numerical defaults."""

import logging
import os
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)


def get_data_dir() -> Path:
    """Get the application data directory. Creates it if it doesn't exist.

    Uses $RADONBL_HOME when set so test runs and CI jobs can keep their
    ledger and logs out of the user's home directory.
    """
    home = os.environ.get("RADONBL_HOME")
    if home:
        data_dir = Path(home)
    else:
        data_dir = Path.home() / ".radonbl"
    data_dir.mkdir(parents=True, exist_ok=True)
    return data_dir


def get_database_path() -> Path:
    """Get the SQLite run-ledger file path."""
    return get_data_dir() / "radonbl.db"


def get_logs_dir() -> Path:
    """Get the logs directory."""
    logs_dir = get_data_dir() / "logs"
    logs_dir.mkdir(parents=True, exist_ok=True)
    return logs_dir


def get_run_logs_dir(run_id: int) -> Path:
    """Get the logs directory for a specific run."""
    run_logs_dir = get_logs_dir() / str(run_id)
    run_logs_dir.mkdir(parents=True, exist_ok=True)
    return run_logs_dir


def get_artifacts_dir() -> Path:
    """Default destination for artifacts of runs without an explicit output path."""
    artifacts_dir = get_data_dir() / "artifacts"
    artifacts_dir.mkdir(parents=True, exist_ok=True)
    return artifacts_dir


def get_max_workers() -> int:
    """Worker cap for parallel Monte Carlo batches and grid solves.

    Read from RADONBL_THREADS; anything unparsable or below 1 falls back to 1.
    """
    # pylint: disable=logging-fstring-interpolation
    raw = os.environ.get("RADONBL_THREADS")
    if raw is None:
        return max(1, min(4, os.cpu_count() or 1))
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"[Config] RADONBL_THREADS={raw!r} is not an integer, using 1")
        return 1
    if value < 1:
        logger.warning(f"[Config] RADONBL_THREADS={value} is below 1, using 1")
        return 1
    return value


@dataclass(frozen=True)
class Tolerances:
    """Centralized comparison tolerances."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-9


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        # pylint: disable=logging-fstring-interpolation
        logger.warning(f"[Config] {name}={raw!r} is not a number, using {default}")
        return default


def get_tolerances() -> Tolerances:
    """Tolerances, overridable via RADONBL_ABS_TOL / RADONBL_REL_TOL."""
    return Tolerances(
        abs_tol=_env_float("RADONBL_ABS_TOL", Tolerances.abs_tol),
        rel_tol=_env_float("RADONBL_REL_TOL", Tolerances.rel_tol),
    )


# Application constants
APP_NAME = "radonbl"
APP_VERSION = "0.1.0"

# Brascamp-Lieb solver
BL_MAX_ITERS = 5000
BL_TOL = 1e-12
KERNEL_GROWTH = 10.0
KERNEL_DET_RATIO = 1e-14
SEMISTABLE_FLOOR = 1e-8
SEMISTABLE_STREAK = 10
REGULARIZATION = 1e-12

# Newton / implicit function machinery
NEWTON_MAX_ITERS = 100
NEWTON_TOL = 1e-12
FD_STEP = 1e-6
CONTRACTION_GRID = 3

# Monte Carlo
MIN_SAMPLES = 1000
MC_CHUNK = 4096
KNAPP_SAMPLES_T = 1000
