import os
import logging
from logging.handlers import RotatingFileHandler
from typing import Dict

from rich.console import Console
from rich.logging import RichHandler

from exceptions import ConfigurationError

STANDARD_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DETAILED_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s - [%(pathname)s:%(lineno)d]'
MAX_BYTES = 10485760  # 10MB
BACKUP_COUNT = 5

# logger name -> (file, format); app: solver progress, error: failures, access: one line per command
LOG_FILES = {
    'app': ('app.log', STANDARD_FORMAT),
    'error': ('error.log', DETAILED_FORMAT),
    'access': ('access.log', DETAILED_FORMAT),
}


def _level(name: str, app_level: int) -> int:
    return logging.ERROR if name == 'error' else app_level


def setup_logging(log_directory: str = "logs", level: str = "INFO") -> Dict[str, logging.Logger]:
    """Attach a rotating file handler to each named logger.

    Calling it again replaces the handlers, so a process can move its logs.
    """
    app_level = logging.getLevelName(level.upper())
    if not isinstance(app_level, int):
        raise ConfigurationError(f"Unknown log level: {level}")

    os.makedirs(log_directory, exist_ok=True)

    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    loggers = {}
    for name, (filename, fmt) in LOG_FILES.items():
        handler = RotatingFileHandler(
            os.path.join(log_directory, filename),
            maxBytes=MAX_BYTES,
            backupCount=BACKUP_COUNT,
            encoding='utf-8'
        )
        handler.setFormatter(logging.Formatter(fmt))
        handler.setLevel(_level(name, app_level))

        logger = logging.getLogger(name)
        logger.setLevel(_level(name, app_level))
        for h in logger.handlers[:]:
            logger.removeHandler(h)
            h.close()
        logger.addHandler(handler)
        logger.propagate = False
        loggers[name] = logger

    loggers['app'].info(f"Logging setup completed in {log_directory} (level {level.upper()})")
    return loggers


def enable_console_logging(level: int = logging.INFO) -> None:
    """Mirror the app and error loggers to stderr through rich."""
    console_handler = RichHandler(console=Console(stderr=True), show_path=False)
    console_handler.setLevel(level)
    for name in ('app', 'error'):
        logging.getLogger(name).addHandler(console_handler)
