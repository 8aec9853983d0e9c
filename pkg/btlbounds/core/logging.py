import logging
import sys
from typing import TextIO

from btlbounds.core.config import settings


class LevelFormatter(logging.Formatter):
    """uvicorn-style level prefix, coloured only when the stream is a terminal."""

    LEVEL_COLORS = {
        logging.DEBUG: "\033[36m",
        logging.INFO: "\033[32m",
        logging.WARNING: "\033[33m",
        logging.ERROR: "\033[31m",
        logging.CRITICAL: "\033[1;31m",
    }
    RESET = "\033[0m"

    def __init__(self, use_color: bool, **kwargs):
        super().__init__(**kwargs)
        self.use_color = use_color

    def format(self, record):
        if self.use_color:
            color = self.LEVEL_COLORS.get(record.levelno, "")
            record.levelprefix = f"{color}{record.levelname}:{self.RESET}    "
        else:
            record.levelprefix = f"{record.levelname}:    "
        return super().format(record)


def build_logger(name: str, level: str, stream: TextIO) -> logging.Logger:
    built = logging.getLogger(name)
    built.setLevel(level.upper())
    built.handlers.clear()
    handler = logging.StreamHandler(stream)
    handler.setLevel(level.upper())
    handler.setFormatter(LevelFormatter(use_color=stream.isatty(), fmt="%(levelprefix)s %(message)s"))
    built.addHandler(handler)
    built.propagate = False
    return built


# stderr keeps CSV written to stdout clean
logger = build_logger("btlbounds", settings.LOG_LEVEL, sys.stderr)
