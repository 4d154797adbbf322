import logging
import sys

from . import _settings


class RuntimeLoggerAdapter(logging.LoggerAdapter):
    """
    A logger adapter that prefixes messages with bound runtime context
    (tile, peer, model, ...) and supports the log-then-raise idiom.
    """

    def __init__(self, logger: logging.Logger, extra: dict | None = None):
        super().__init__(logger, extra or {})

    def process(self, msg, kwargs):
        if self.extra:
            prefix = " ".join(f"{k}={v}" for k, v in self.extra.items())
            msg = f"[{prefix}] {msg}"
        return msg, kwargs

    def bind(self, **context) -> "RuntimeLoggerAdapter":
        """Return a new adapter with additional context."""
        return RuntimeLoggerAdapter(self.logger, {**self.extra, **context})

    def raise_error(self, exc: BaseException):
        """
        Log an exception message at ERROR level and raise it.

        Args:
            exc: The exception to log and raise

        Raises:
            BaseException: Always ``exc``
        """
        self.error("%s: %s", type(exc).__name__, exc)
        raise exc


def get_logger(name: str, **context) -> RuntimeLoggerAdapter:
    """
    Get a logger instance with the given name and bound context.

    Args:
        name: The name of the logger
        **context: Key/value pairs prefixed to every message

    Returns:
        RuntimeLoggerAdapter: An adapter writing diagnostics to stderr
    """
    logger = logging.getLogger(name)

    # Only add handlers if none exist
    if not logger.handlers:
        # Diagnostics go to stderr, machine-readable output owns stdout
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(
            logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        )
        logger.addHandler(console_handler)
        logger.setLevel(_settings.get_setting("log_level").upper())

    return RuntimeLoggerAdapter(logger, context)


def set_log_level(level: str) -> None:
    """Set the level of every rcbkit logger, existing and future."""
    _settings.update_settings({"log_level": level})
    for name, logger in logging.Logger.manager.loggerDict.items():
        if name.startswith("rcbkit") and isinstance(logger, logging.Logger):
            logger.setLevel(level.upper())
