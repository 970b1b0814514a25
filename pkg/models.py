from datetime import datetime, timezone
from enum import Enum as PyEnum

from sqlalchemy import (
    Column,
    DateTime,
    Enum,
    Float,
    ForeignKey,
    Integer,
    String,
    Text,
)
from sqlalchemy.orm import relationship

from database import Base


def _get_utc_now() -> datetime:
    """Current time in UTC (timezone-aware), used as a Column default."""
    return datetime.now(timezone.utc)


class RunStatus(PyEnum):
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class RunRecord(Base):
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True)
    command = Column(String, nullable=False)
    config_digest = Column(String(64), nullable=False, index=True)
    graph_digest = Column(String(64), nullable=False)
    seed = Column(Integer, nullable=False)
    gamma = Column(Float, nullable=False)
    eta = Column(Float, nullable=False)
    alpha = Column(Float, nullable=False)
    iterations = Column(Integer, nullable=False)
    burn_in = Column(Integer, nullable=False)
    lag = Column(Integer, nullable=False)
    workers = Column(Integer, default=1, nullable=False)
    output_dir = Column(String, nullable=False)
    status = Column(Enum(RunStatus, name="run_status"), default=RunStatus.RUNNING, nullable=False)
    started_at = Column(DateTime(timezone=True), default=_get_utc_now, nullable=False)
    finished_at = Column(DateTime(timezone=True), nullable=True)
    manifest = Column(Text, nullable=True)

    samples = relationship("SampleRecord", back_populates="run", cascade="all, delete-orphan")


class SampleRecord(Base):
    __tablename__ = "samples"

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey("runs.id"), nullable=False)
    iteration = Column(Integer, nullable=False)
    log_likelihood = Column(Float, nullable=False)
    average_depth = Column(Float, nullable=False)
    path = Column(String, nullable=True)

    run = relationship("RunRecord", back_populates="samples")
