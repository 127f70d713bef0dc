from .config import Settings, LogLevel, setup_logging, LOG_FORMAT

__all__ = [
    "Settings",
    "LogLevel",
    "setup_logging",
    "LOG_FORMAT",
]
