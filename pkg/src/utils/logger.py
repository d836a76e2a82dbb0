import logging
from typing import Dict

# Global logger instances
_loggers: Dict[str, logging.Logger] = {}

def get_logger(name: str) -> logging.Logger:
    """Named logger; only the names in LOG_FILES get handlers from setup_logging."""
    if name not in _loggers:
        _loggers[name] = logging.getLogger(name)
    return _loggers[name]

def get_app_logger() -> logging.Logger:
    return get_logger('app')

def get_error_logger() -> logging.Logger:
    return get_logger('error')

def get_access_logger() -> logging.Logger:
    """One entry per CLI command with its arguments"""
    return get_logger('access')

def log_failure(error: BaseException, unexpected: bool = False) -> str:
    """Record ``error`` on the error log and return the ``ClassName: message`` line for the user."""
    line = f"{type(error).__name__}: {error}"
    if unexpected:
        get_error_logger().error(f"Unexpected error: {line}", exc_info=error)
    else:
        get_error_logger().error(line)
    return line
