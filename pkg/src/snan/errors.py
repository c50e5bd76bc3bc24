from __future__ import annotations


class SnanError(Exception):
    pass


class ConfigError(SnanError, ValueError):
    pass


class WiringError(SnanError, ValueError):
    pass


class ClassificationError(SnanError, RuntimeError):
    pass


class EmptyTableError(SnanError, LookupError):
    pass
