from __future__ import annotations

import logging
import sys

import logfire

from skewscope import constants


_HANDLER_NAME = "skewscope-stderr"


def get_logger(name: str) -> logging.Logger:
    """Get a logger for the given name.

    Args:
        name: The name of the logger, will be prefixed with 'skewscope.'

    Returns:
        A logger instance
    """
    if name.startswith("skewscope."):
        name = name.removeprefix("skewscope.")
    return logging.getLogger(f"skewscope.{name}")


def configure_logging(level: str | int = "info") -> logging.Handler:
    """Route package logs to stderr and set up logfire spans.

    Calling this repeatedly replaces the previously installed handler.

    Args:
        level: Either a level name ("debug", "info", ...) or a logging level

    Returns:
        The installed handler
    """
    if isinstance(level, str):
        level = constants.LOG_LEVELS.get(level.lower(), logging.INFO)
    root = logging.getLogger("skewscope")
    for handler in root.handlers[:]:
        if handler.get_name() == _HANDLER_NAME:
            root.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.set_name(_HANDLER_NAME)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(level)
    # Spans stay in-process unless a logfire token is present.
    logfire.configure(send_to_logfire="if-token-present", console=False)
    return handler


def set_level(level: int) -> None:
    """Change the package log level without touching handlers."""
    logging.getLogger("skewscope").setLevel(level)
