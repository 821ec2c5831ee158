"""Logging configuration and utilities."""

import functools
import logging
import logging.handlers
import sys
import time
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar

from config.config import config

F = TypeVar("F", bound=Callable[..., Any])


def setup_logger(
    name: str = "rainbow_lab",
    level: Optional[str] = None,
    log_file: Optional[str] = None,
    console: bool = True,
) -> logging.Logger:
    """Set up logger with file and console handlers.

    Args:
        name: Logger name
        level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Path to log file
        console: Whether to log to console

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    # Clear existing handlers
    logger.handlers.clear()

    # Set log level
    log_level = getattr(logging, (level or config.log_level).upper(), logging.INFO)
    logger.setLevel(log_level)

    # Create formatter
    formatter = logging.Formatter(
        fmt="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    # Console handler. stderr keeps stdout free for the machine-readable lines.
    if console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(log_level)
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

    # File handler
    log_file_path = log_file if log_file is not None else config.log_file_path
    if log_file_path:
        log_path = Path(log_file_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        # Use rotating file handler to prevent log files from getting too large
        file_handler = logging.handlers.RotatingFileHandler(
            log_file_path,
            maxBytes=10 * 1024 * 1024,  # 10MB
            backupCount=5,
            encoding="utf-8",
        )
        file_handler.setLevel(log_level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def get_logger(name: str) -> logging.Logger:
    """Get logger instance.

    Module loggers live under the ``rainbow_lab`` hierarchy so that the
    handlers installed by :func:`setup_logger` apply to them.

    Args:
        name: Logger name

    Returns:
        Logger instance
    """
    if not name.startswith("rainbow_lab"):
        name = f"rainbow_lab.{name}"
    return logging.getLogger(name)


class RunContextFilter(logging.Filter):
    """Prefix records with the (env, agent, seed) of the run emitting them."""

    def __init__(self, env_name: str, agent_label: str, seed: int) -> None:
        """Initialize filter.

        Args:
            env_name: Environment name
            agent_label: Short agent description
            seed: Run seed
        """
        super().__init__()
        self.prefix = f"[{env_name}/{agent_label}/seed={seed}] "

    def filter(self, record: logging.LogRecord) -> bool:
        """Attach the run prefix to the record message."""
        if not str(record.msg).startswith(self.prefix):
            record.msg = f"{self.prefix}{record.msg}"
        return True


def log_execution_time(func: F) -> F:
    """Decorator to log function execution time.

    Args:
        func: Function to decorate

    Returns:
        Decorated function
    """

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        logger = get_logger(func.__module__)

        start_time = time.perf_counter()
        try:
            result = func(*args, **kwargs)
            execution_time = time.perf_counter() - start_time
            logger.info(f"{func.__name__} executed in {execution_time:.2f} seconds")
            return result
        except Exception as e:
            execution_time = time.perf_counter() - start_time
            logger.error(
                f"{func.__name__} failed after {execution_time:.2f} seconds: {e}"
            )
            raise

    return wrapper  # type: ignore[return-value]
