from __future__ import annotations

import logging
import os
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

LOG_ENV_VAR = "REPLICA_PLANNER_LOG"

_LEVELS = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def resolve_level(configured: Optional[str] = None) -> int:
    """
    Env var wins over the settings value; unknown names fall back to INFO.
    """
    raw = os.environ.get(LOG_ENV_VAR) or configured or "info"
    return _LEVELS.get(raw.strip().lower(), logging.INFO)


def configure_logging(configured: Optional[str] = None) -> int:
    level = resolve_level(configured)
    handler = RichHandler(
        console=Console(stderr=True),
        show_path=False,
        rich_tracebacks=False,
    )
    logging.basicConfig(level=level, format="%(message)s", handlers=[handler], force=True)
    logging.captureWarnings(True)

    raw = os.environ.get(LOG_ENV_VAR)
    if raw and raw.strip().lower() not in _LEVELS:
        logging.getLogger(__name__).warning(
            "%s=%r not in %s; using info", LOG_ENV_VAR, raw, sorted(_LEVELS)
        )
    return level
