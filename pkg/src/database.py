"""Database configuration and connection management for benchmark history."""
import logging
from typing import Optional

from sqlalchemy.ext.asyncio import AsyncEngine, AsyncSession, async_sessionmaker, create_async_engine
from sqlalchemy.orm import declarative_base

from src.config import SETTINGS

logger = logging.getLogger(__name__)

DB_PATH = SETTINGS.database_path


def database_url(db_path: str) -> str:
    return f"sqlite+aiosqlite:///{db_path}"


def make_engine(db_path: str) -> AsyncEngine:
    return create_async_engine(
        database_url(db_path),
        echo=False,  # True for SQL query logging
        future=True,
    )


def make_session_maker(engine: AsyncEngine) -> async_sessionmaker:
    return async_sessionmaker(engine, class_=AsyncSession, expire_on_commit=False)


# Nothing is opened until the first session; importing is free
engine = make_engine(DB_PATH)
async_session_maker = make_session_maker(engine)

# Base class for models
Base = declarative_base()


def _import_models():
    """Import all models so they are registered with Base.metadata."""
    from src.models import BenchRun  # noqa: F401


async def init_db(target: Optional[AsyncEngine] = None) -> None:
    """Create tables on `target` (the configured engine by default)."""
    _import_models()
    target = engine if target is None else target
    async with target.begin() as conn:
        await conn.run_sync(Base.metadata.create_all)
    logger.debug("benchmark history tables ready at %s", target.url)
