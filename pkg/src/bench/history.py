"""Benchmark history: store each run, report rows whose deterministic output drifted."""
import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import List, Optional

from sqlalchemy import select
from sqlalchemy.ext.asyncio import AsyncEngine

from src.bench.experiments import BenchReport, BenchRow
from src.database import async_session_maker, init_db, make_session_maker
from src.models import BenchRun

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Drift:
    experiment: str
    config_key: str
    evaluator: str
    stored: dict
    current: dict

    def describe(self) -> str:
        changed = sorted(k for k in set(self.stored) | set(self.current) if self.stored.get(k) != self.current.get(k))
        return f"{self.experiment} {self.config_key} {self.evaluator}: {', '.join(changed)} changed"


def _counters_json(row: BenchRow) -> str:
    data = row.deterministic()
    data.pop("result_digest", None)
    return json.dumps(data, sort_keys=True)


async def record_report(report: BenchReport, engine: Optional[AsyncEngine] = None) -> List[Drift]:
    """Upsert every row of `report`; rows seen before must reproduce exactly.

    Returns the rows whose counters or result digest differ from the stored
    run. The stored values are kept so a drift stays visible on re-runs.
    """
    await init_db(engine)
    session_maker = make_session_maker(engine) if engine is not None else async_session_maker

    now = datetime.now(timezone.utc).strftime("%Y-%m-%d %H:%M:%S")
    drifts: List[Drift] = []
    async with session_maker() as session:
        for row in report.rows:
            counters = _counters_json(row)
            result = await session.execute(
                select(BenchRun).where(
                    BenchRun.experiment == report.experiment,
                    BenchRun.seed == report.seed,
                    BenchRun.config_key == row.config_key,
                    BenchRun.evaluator == row.evaluator,
                )
            )
            existing = result.scalar_one_or_none()

            if existing is None:
                session.add(BenchRun(
                    experiment=report.experiment,
                    seed=report.seed,
                    config_key=row.config_key,
                    evaluator=row.evaluator,
                    counters=counters,
                    result_digest=row.result_digest,
                    wall_time=row.wall_time,
                    recorded_at=now,
                    runs=1,
                ))
                continue

            if existing.counters != counters or existing.result_digest != row.result_digest:
                stored = json.loads(existing.counters)
                stored["result_digest"] = existing.result_digest
                current = json.loads(counters)
                current["result_digest"] = row.result_digest
                drifts.append(Drift(report.experiment, row.config_key, row.evaluator, stored, current))
            existing.wall_time = row.wall_time
            existing.recorded_at = now
            existing.runs = (existing.runs or 0) + 1

        await session.commit()

    for drift in drifts:
        logger.warning("determinism drift: %s", drift.describe())
    return drifts
