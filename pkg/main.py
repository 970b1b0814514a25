import logging
import sys
from typing import List, Optional

from doctree.application import build_application
from doctree.common import SettingsError


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    logging.getLogger("doctree").setLevel(logging.DEBUG if verbose else logging.INFO)
    for noisy in ("matplotlib", "sqlalchemy.engine", "alembic"):
        logging.getLogger(noisy).setLevel(logging.WARNING)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_application()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    configure_logging(args.verbose)
    logger = logging.getLogger("doctree.main")
    try:
        return args.handler(args)
    except SettingsError as exc:
        logger.error("Command %r has invalid settings: %s", args.command, exc)
        return 2
    except (ValueError, RuntimeError) as exc:
        logger.exception("Command %r failed: %s", args.command, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
