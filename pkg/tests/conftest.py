"""Shared fixtures: every test gets its own data dir and an in-memory ledger."""

import numpy as np
import pytest

from radonbl.database.database import configure_database, init_database


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    monkeypatch.setenv("RADONBL_HOME", str(tmp_path / "home"))
    monkeypatch.setenv("RADONBL_THREADS", "2")
    configure_database("sqlite://")
    init_database()
    yield tmp_path
    configure_database(None)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
