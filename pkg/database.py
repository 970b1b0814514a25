from pathlib import Path
from typing import Optional, Union

from sqlalchemy import create_engine, event
from sqlalchemy.engine import Engine
from sqlalchemy.orm import declarative_base, sessionmaker

REGISTRY_FILENAME = "registry.sqlite"


def resolve_registry_url(raw_value: Optional[str], output_dir: Union[str, Path, None] = None) -> str:
    """Turn a registry option into a SQLAlchemy URL.

    Full URLs pass through, bare paths become SQLite files, and no value
    means ``<output_dir>/registry.sqlite``.
    """
    cleaned = (raw_value or "").strip()
    if "://" in cleaned:
        return cleaned
    if cleaned:
        return f"sqlite:///{Path(cleaned).expanduser().resolve()}"
    if output_dir is None:
        raise ValueError("A registry URL or an output directory is required.")
    return f"sqlite:///{(Path(output_dir) / REGISTRY_FILENAME).resolve()}"


def create_registry_engine(url: str) -> Engine:
    engine = create_engine(url, future=True, echo=False, pool_pre_ping=True)
    if engine.dialect.name == "sqlite":

        @event.listens_for(engine, "connect")
        def _enable_foreign_keys(dbapi_connection, _record) -> None:
            cursor = dbapi_connection.cursor()
            cursor.execute("PRAGMA foreign_keys=ON")
            cursor.close()

    return engine


def build_session_factory(engine: Engine) -> sessionmaker:
    return sessionmaker(bind=engine, autoflush=False, autocommit=False, future=True)


Base = declarative_base()
