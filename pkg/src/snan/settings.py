from __future__ import annotations

import logging
import os
import sys
from dataclasses import dataclass

DEFAULT_LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


@dataclass(frozen=True)
class RuntimeSettings:
    threads: int = 1
    log_level: str = "WARNING"


def settings_from_env() -> RuntimeSettings:
    threads = _parse_int_env("SNAN_THREADS", 1)
    if threads is None or threads < 1:
        threads = 1
    if os.environ.get("SNAN_DEBUG") == "1":
        level = "DEBUG"
    else:
        level = _parse_level_env("SNAN_LOG_LEVEL", "WARNING")
    return RuntimeSettings(threads=threads, log_level=level)


def configure_logging(settings: RuntimeSettings | None = None) -> None:
    settings = settings or settings_from_env()
    root = logging.getLogger("snan")
    root.setLevel(settings.log_level)
    if not any(getattr(h, "_snan_handler", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(DEFAULT_LOG_FORMAT))
        handler._snan_handler = True
        root.addHandler(handler)


def _parse_int_env(name: str, default: int | None) -> int | None:
    value = os.environ.get(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        return default


def _parse_level_env(name: str, default: str) -> str:
    value = os.environ.get(name, "").strip().upper()
    if value in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        return value
    return default
