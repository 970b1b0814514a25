from logging.config import fileConfig

from alembic import context

# models must be imported so their tables register on Base.metadata
from database import Base, create_registry_engine, resolve_registry_url
from models import RunRecord, SampleRecord  # noqa: F401

config = context.config

if config.config_file_name is not None:
    fileConfig(config.config_file_name)

target_metadata = Base.metadata


def _registry_url() -> str:
    """``alembic -x url=...`` wins over ``sqlalchemy.url`` in alembic.ini."""
    url = context.get_x_argument(as_dictionary=True).get("url") or config.get_main_option("sqlalchemy.url")
    if not url:
        raise ValueError("Pass the registry with 'alembic -x url=sqlite:///path/registry.sqlite upgrade head'.")
    return resolve_registry_url(url)


def run_migrations_offline() -> None:
    context.configure(
        url=_registry_url(),
        target_metadata=target_metadata,
        literal_binds=True,
        dialect_opts={"paramstyle": "named"},
    )

    with context.begin_transaction():
        context.run_migrations()


def run_migrations_online() -> None:
    engine = create_registry_engine(_registry_url())
    with engine.connect() as connection:
        context.configure(connection=connection, target_metadata=target_metadata, render_as_batch=True)

        with context.begin_transaction():
            context.run_migrations()
    engine.dispose()


if context.is_offline_mode():
    run_migrations_offline()
else:
    run_migrations_online()
