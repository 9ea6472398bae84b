import logging
import os
import sys

_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
_configured = False


def _configure_root() -> None:
    global _configured
    if _configured:
        return
    level_name = (os.getenv("QWALLS_LOG_LEVEL") or "WARNING").strip().upper()
    level = getattr(logging, level_name, logging.WARNING)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(_FORMAT))

    root = logging.getLogger("qwalls")
    root.addHandler(handler)
    root.setLevel(level)
    root.propagate = False
    _configured = True


def get_logger(name: str) -> logging.Logger:
    """Module logger under the shared ``qwalls`` namespace"""
    _configure_root()
    return logging.getLogger(f"qwalls.{name}")


def set_level(level_name: str) -> None:
    """Override the level picked at import time, e.g. after a .env file was loaded"""
    _configure_root()
    logging.getLogger("qwalls").setLevel(getattr(logging, level_name.strip().upper(), logging.WARNING))
