"""
errbound/core/logging.py

Purpose: Logging configuration

- Standardizes log format
- Controls log levels
- JSON records in production, readable lines in development
- Context tracking (instance, radius, seed, operation)
- Writes to stderr so command output stays clean
"""

import json
import logging
import sys
from datetime import datetime, timezone

from errbound.core.config import settings

CONTEXT_FIELDS = ("instance", "operation", "radius", "seed")


class StructuredFormatter(logging.Formatter):
    """
    Formatter for structured JSON logging in production.
    One object per record, parseable by log tooling.
    """

    def format(self, record: logging.LogRecord) -> str:
        log_data = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }

        for key in CONTEXT_FIELDS:
            if hasattr(record, key):
                log_data[key] = getattr(record, key)

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_data, default=str)


class DevelopmentFormatter(logging.Formatter):
    """
    Human-readable formatter for interactive use.
    """

    def format(self, record: logging.LogRecord) -> str:
        colors = {
            "DEBUG": "\033[36m",
            "INFO": "\033[32m",
            "WARNING": "\033[33m",
            "ERROR": "\033[31m",
            "CRITICAL": "\033[35m",
        }
        reset = "\033[0m"

        color = colors.get(record.levelname, reset)
        timestamp = datetime.fromtimestamp(record.created).strftime("%H:%M:%S")
        message = f"{color}[{timestamp}] {record.levelname:<8}{reset} {record.name}: {record.getMessage()}"

        context_parts = [
            f"{key}={getattr(record, key)}" for key in CONTEXT_FIELDS if hasattr(record, key)
        ]
        if context_parts:
            message += f" [{', '.join(context_parts)}]"

        if record.exc_info:
            message += "\n" + self.formatException(record.exc_info)

        return message


def setup_logging(level: str = None) -> logging.Logger:
    """
    Configures toolkit-wide logging with the environment's formatter.

    Args:
        level: Optional override of settings.LOG_LEVEL

    Returns:
        The package root logger
    """
    log_level = getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.WARNING)

    handler = logging.StreamHandler(sys.stderr)
    if settings.is_production:
        handler.setFormatter(StructuredFormatter())
    else:
        handler.setFormatter(DevelopmentFormatter())

    logger = logging.getLogger(settings.APP_NAME)
    logger.setLevel(log_level)
    logger.handlers.clear()
    logger.addHandler(handler)
    logger.propagate = False

    # scipy's optimisers warn through the warnings module; route them here
    logging.captureWarnings(True)
    logging.getLogger("py.warnings").setLevel(logging.ERROR)

    logger.debug(
        "Logging configured",
        extra={"operation": "setup_logging"},
    )
    return logger


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger under the package namespace.

    Args:
        name: Logger name (usually __name__)

    Returns:
        Logger instance
    """
    if name.startswith(f"{settings.APP_NAME}."):
        return logging.getLogger(name)
    return logging.getLogger(f"{settings.APP_NAME}.{name}")


class LogContext:
    """
    Context manager for adding structured context to logs.

    Usage:
        with LogContext(instance="cubic-regular", operation="analyze"):
            logger.info("Starting analysis")
    """

    def __init__(self, **kwargs):
        self.context = kwargs
        self._old_factory = None

    def __enter__(self):
        self._old_factory = logging.getLogRecordFactory()

        def record_factory(*args, **kwargs):
            record = self._old_factory(*args, **kwargs)
            for key, value in self.context.items():
                setattr(record, key, value)
            return record

        logging.setLogRecordFactory(record_factory)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        logging.setLogRecordFactory(self._old_factory)
