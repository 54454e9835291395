"""SQLAlchemy models for the benchmark history."""
from sqlalchemy import Column, Float, Integer, String, Text

from src.database import Base


class BenchRun(Base):
    """Latest measurement of one evaluator on one experiment configuration."""

    __tablename__ = "bench_runs"

    experiment = Column(String, primary_key=True)
    seed = Column(Integer, primary_key=True)
    config_key = Column(String, primary_key=True)
    evaluator = Column(String, primary_key=True)
    # Deterministic part of the row, sorted-key JSON
    counters = Column(Text, nullable=False, default="{}")
    result_digest = Column(String, nullable=True)
    wall_time = Column(Float, default=0.0)
    recorded_at = Column(String, nullable=False)
    runs = Column(Integer, default=1)

    def __repr__(self):
        return (
            f"<BenchRun(experiment={self.experiment}, seed={self.seed}, "
            f"config_key={self.config_key}, evaluator={self.evaluator}, runs={self.runs})>"
        )
