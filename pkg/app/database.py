from functools import lru_cache
from pathlib import Path

from sqlalchemy import Engine, event
from sqlmodel import Session, SQLModel, create_engine

# Import the table models so they're registered on the metadata.
from app.models import RunManifest, SweepPoint  # noqa: F401

REGISTRY_NAME = "runs.db"


@lru_cache(maxsize=16)
def engine_for(out_root: Path) -> Engine:
    """SQLite run registry kept next to the run directories it describes."""
    out_root.mkdir(parents=True, exist_ok=True)
    engine = create_engine(f"sqlite:///{out_root / REGISTRY_NAME}", echo=False)

    @event.listens_for(engine, "connect")
    def _enable_foreign_keys(dbapi_connection, _record) -> None:
        cursor = dbapi_connection.cursor()
        cursor.execute("PRAGMA foreign_keys=ON")
        cursor.close()

    return engine


def create_tables(out_root: Path) -> Engine:
    engine = engine_for(out_root.resolve())
    SQLModel.metadata.create_all(engine)
    return engine


def get_session(out_root: Path) -> Session:
    return Session(create_tables(out_root))
