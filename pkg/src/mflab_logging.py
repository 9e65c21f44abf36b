"""
Centralized logging configuration and error handling utilities for mflab.
"""
import logging
import logging.handlers
import os
from typing import Optional, Dict, Any

import numpy as np
from marshmallow import ValidationError as SchemaError


def setup_logging(app_name: str = "mflab", level: str = "INFO",
                  log_file: Optional[str] = "logs/mflab.log",
                  max_bytes: int = 10 * 1024 * 1024, backup_count: int = 5) -> logging.Logger:
    """
    Set up centralized logging configuration.

    Args:
        app_name: Name of the root logger for the lab
        level: Console log level name
        log_file: Path of the rotating warning log, or None to disable it
        max_bytes: Rotation size of the log file
        backup_count: Number of rotated files kept

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(app_name)
    logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))

    # Prevent adding multiple handlers
    if logger.handlers:
        return logger

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logger.level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=max_bytes,
            backupCount=backup_count
        )
        file_handler.setLevel(logging.WARNING)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def get_logger(name: str = "mflab") -> logging.Logger:
    """
    Get a logger instance.

    Args:
        name: Name for the logger

    Returns:
        Logger instance
    """
    return logging.getLogger(f"mflab.{name}")


class MFLabError(Exception):
    """Base exception class for mflab errors."""

    def __init__(self, message: str, exit_code: int = 3, error_code: str = "INTERNAL_ERROR",
                 operation: str = ""):
        self.message = message
        self.exit_code = exit_code
        self.error_code = error_code
        self.operation = operation
        super().__init__(f"{operation}: {message}" if operation else message)


class NumericError(MFLabError):
    """Raised when a computation cannot reach its accuracy or stability target."""

    def __init__(self, message: str, operation: str = "", error_code: str = "NUMERIC_ERROR"):
        super().__init__(message, 3, error_code, operation)


def create_error_response(message: str, exit_code: int = 3, error_code: str = "INTERNAL_ERROR",
                          operation: str = "") -> Dict[str, Any]:
    """
    Create a standardized error report.

    Args:
        message: Error message
        exit_code: Process exit status associated with the error
        error_code: Internal error code
        operation: Module and operation that failed

    Returns:
        Standardized error report dictionary
    """
    return {
        "error": {
            "code": error_code,
            "message": message,
            "exit_code": exit_code,
            "operation": operation
        }
    }


def handle_exception(e: Exception, logger: logging.Logger, context: str = "") -> Dict[str, Any]:
    """
    Handle and log exceptions consistently.

    Args:
        e: The exception that occurred
        logger: Logger instance
        context: Additional context about where the error occurred

    Returns:
        Standardized error report
    """
    error_msg = f"{context}: {str(e)}" if context else str(e)
    logger.error(error_msg, exc_info=True)

    if isinstance(e, MFLabError):
        return create_error_response(e.message, e.exit_code, e.error_code, e.operation)

    if isinstance(e, SchemaError):
        return create_error_response(f"Invalid experiment document: {e.messages}", 2, "CONFIG_ERROR", context)
    # LinAlgError is a ValueError subclass
    if isinstance(e, (FloatingPointError, np.linalg.LinAlgError)):
        return create_error_response(str(e), 3, "NUMERIC_ERROR", context)
    elif isinstance(e, (ValueError, KeyError)):
        return create_error_response(f"Invalid configuration: {e}", 2, "CONFIG_ERROR", context)
    elif isinstance(e, FileNotFoundError):
        return create_error_response(f"File not found: {e.filename}", 2, "INPUT_ERROR", context)
    else:
        return create_error_response("Internal error", 3, "INTERNAL_ERROR", context)
