import sys
from pathlib import Path
from typing import Set

from loguru import logger

from app.config import LOG_FORMAT, LOG_LEVEL, LOG_ROTATION, LOGS_DIR

_added: Set[Path] = set()
# loguru's default stderr handler has id 0
_console_id: int = 0


def add_file_sink(name: str, level: str = LOG_LEVEL) -> Path:
    """Add a rotating ``logs/<name>.log`` sink once per process."""
    path = (LOGS_DIR / f"{name}.log").resolve()
    if path not in _added:
        logger.add(path, format=LOG_FORMAT, level=level, rotation=LOG_ROTATION)
        _added.add(path)
    return path


def configure_console(level: str = LOG_LEVEL) -> int:
    """Replace the stderr handler, leaving file sinks in place."""
    global _console_id
    try:
        logger.remove(_console_id)
    except ValueError:
        pass
    _console_id = logger.add(sys.stderr, level=level.upper())
    return _console_id
