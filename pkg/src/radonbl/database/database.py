"""Database connection and session management."""

from typing import Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker
from sqlalchemy.pool import StaticPool

from radonbl.core.config import get_database_path
from radonbl.database.models import Base


# Global engine and session factory
ENGINE: Optional[Engine] = None
SESSION_LOCAL: Optional[sessionmaker] = None
DATABASE_URL: Optional[str] = None


def configure_database(url: Optional[str] = None):
    """Point the ledger at ``url`` (default: the SQLite file in the data dir).

    Drops any existing engine; the next call to :func:`get_engine` connects anew.
    """
    global ENGINE, SESSION_LOCAL, DATABASE_URL  # pylint: disable=global-statement
    if ENGINE is not None:
        ENGINE.dispose()
    ENGINE = None
    SESSION_LOCAL = None
    DATABASE_URL = url


def get_engine() -> Engine:
    """Get or create the SQLAlchemy engine."""
    global ENGINE  # pylint: disable=global-statement
    if ENGINE is None:
        url = DATABASE_URL or f"sqlite:///{get_database_path()}"
        kwargs = {"echo": False, "connect_args": {"check_same_thread": False}}
        if url in ("sqlite://", "sqlite:///:memory:"):
            # one shared connection, otherwise every session sees an empty database
            kwargs["poolclass"] = StaticPool
        ENGINE = create_engine(url, **kwargs)
    return ENGINE


def get_session_factory() -> sessionmaker:
    """Get or create the session factory."""
    global SESSION_LOCAL  # pylint: disable=global-statement
    if SESSION_LOCAL is None:
        SESSION_LOCAL = sessionmaker(bind=get_engine(), autocommit=False, autoflush=False)
    return SESSION_LOCAL


def init_database():
    """Initialize the database, creating tables if they don't exist."""
    Base.metadata.create_all(bind=get_engine())


def get_session() -> Session:
    """Get a new database session. Caller is responsible for closing it."""
    factory = get_session_factory()
    return factory()
