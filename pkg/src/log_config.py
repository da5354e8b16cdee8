"""
Logging setup for TexSeek

All diagnostics go to stderr through rich, so stdout carries only
machine-readable results.
"""
import logging
import os
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

LOG_ENV_VAR = "TEXSEEK_LOG"
DEFAULT_LEVEL = "warning"

_LEVELS = {
    "error": logging.ERROR,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

_handler: Optional[logging.Handler] = None


def resolve_level(level: Optional[str] = None) -> int:
    """
    Map a level name to a logging level

    Args:
        level: Level name; falls back to TEXSEEK_LOG, then to warning

    Returns:
        The numeric logging level
    """
    name = (level or os.environ.get(LOG_ENV_VAR) or DEFAULT_LEVEL).strip().lower()
    return _LEVELS.get(name, _LEVELS[DEFAULT_LEVEL])


def configure_logging(level: Optional[str] = None) -> logging.Logger:
    """
    Install a single stderr RichHandler on the package logger

    Args:
        level: Optional level name overriding TEXSEEK_LOG

    Returns:
        The configured "src" package logger
    """
    global _handler

    logger = logging.getLogger("src")
    if _handler is not None:
        logger.removeHandler(_handler)

    _handler = RichHandler(
        console=Console(stderr=True),
        show_time=False,
        show_path=False,
        markup=False,
    )
    _handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(_handler)
    logger.setLevel(resolve_level(level))
    logger.propagate = False
    return logger
