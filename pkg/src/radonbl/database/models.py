"""SQLAlchemy database models."""

import json
from datetime import datetime
from typing import Optional

from sqlalchemy import DateTime, Integer, String, Text
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column


# pylint: disable=too-few-public-methods
class Base(DeclarativeBase):
    """Base class for all models."""


class ExperimentRun(Base):
    """
    One CLI invocation: what was asked, with which seed, and how it ended.

    Live progress is tracked in memory by ExperimentRunner; the row is written
    when the run starts and completed when it finishes.
    """
    # pylint: disable=too-few-public-methods
    __tablename__ = "experiment_runs"

    id: Mapped[int] = mapped_column(primary_key=True, autoincrement=True)
    command: Mapped[str] = mapped_column(String(32), nullable=False)
    action: Mapped[str] = mapped_column(String(64), nullable=False)
    # decimal text, seeds range over [0, 2^64)
    seed: Mapped[str] = mapped_column(String(20), nullable=False, default="0")
    parameters: Mapped[str] = mapped_column(Text, nullable=False, default="{}")
    status: Mapped[str] = mapped_column(String(16), nullable=False, default="pending")
    exit_code: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)
    summary: Mapped[Optional[str]] = mapped_column(Text, nullable=True)
    artifact_path: Mapped[Optional[str]] = mapped_column(Text, nullable=True)
    log_path: Mapped[Optional[str]] = mapped_column(Text, nullable=True)

    # Timestamps
    created_at: Mapped[datetime] = mapped_column(
        DateTime,
        nullable=False,
        default=datetime.utcnow
    )
    finished_at: Mapped[Optional[datetime]] = mapped_column(DateTime, nullable=True)

    @property
    def parameter_dict(self) -> dict:
        return json.loads(self.parameters or "{}")

    def __repr__(self) -> str:
        return f"<ExperimentRun(id={self.id}, command='{self.command} {self.action}')>"
