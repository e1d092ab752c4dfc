"""
Logging setup: stdlib loggers rendered through structlog.
"""

import logging
import sys
from pathlib import Path
from typing import List, Optional

import structlog

_CONFIGURED = False


def _shared_processors() -> List[structlog.types.Processor]:
    return [
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso", utc=True),
        structlog.stdlib.ExtraAdder(),
    ]


def configure_logging(
    level: str = "INFO",
    fmt: str = "text",
    log_file: Optional[str] = None,
    force: bool = False,
) -> None:
    """
    Configure the root logger once per process.

    Records go to stderr (stdout carries results) and optionally to a file.
    ``fmt`` selects console lines ("text") or one JSON object per record ("json").
    """
    global _CONFIGURED
    if _CONFIGURED and not force:
        return

    if fmt == "json":
        renderer: structlog.types.Processor = structlog.processors.JSONRenderer(sort_keys=True)
    else:
        renderer = structlog.dev.ConsoleRenderer(colors=False)

    formatter = structlog.stdlib.ProcessorFormatter(
        foreign_pre_chain=_shared_processors(),
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            renderer,
        ],
    )

    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    for handler in handlers:
        handler.setFormatter(formatter)
        root.addHandler(handler)
    root.setLevel(level.upper())

    _CONFIGURED = True
