"""
Exception to exit-code mapping for every command.
"""

import logging
import sys
from collections.abc import Callable
from functools import wraps

from pydantic import ValidationError

from src.errors import (
    ConfigError,
    IncompatibleRunsError,
    MissingArtifactError,
    OutputValidationError,
    RunLockedError,
    ViewfixError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_MISSING_ARTIFACT = 3
EXIT_OUTPUT_INVALID = 4
EXIT_LOCKED = 5
EXIT_INCOMPATIBLE = 6

_CODES: list[tuple[type[Exception], int, str]] = [
    (ConfigError, EXIT_CONFIG, "Invalid configuration"),
    (ValidationError, EXIT_CONFIG, "Invalid configuration"),
    (MissingArtifactError, EXIT_MISSING_ARTIFACT, "Missing upstream artifact"),
    (OutputValidationError, EXIT_OUTPUT_INVALID, "Output validation failed"),
    (RunLockedError, EXIT_LOCKED, "Run directory is locked"),
    (IncompatibleRunsError, EXIT_INCOMPATIBLE, "Incompatible runs"),
]


def exit_code_for(error: Exception) -> int:
    for kind, code, _ in _CODES:
        if isinstance(error, kind):
            return code
    return EXIT_UNEXPECTED


def handle_command_errors(func: Callable[..., None]) -> Callable[..., int]:
    """Decorator turning a command into an exit code, printing errors to stderr."""

    @wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            func(*args, **kwargs)
        except (ViewfixError, ValidationError) as e:
            code = exit_code_for(e)
            title = next((t for kind, _, t in _CODES if isinstance(e, kind)), "Error")
            print(f"Error: {title}: {getattr(e, 'message', str(e))}", file=sys.stderr)
            for key, value in getattr(e, "details", {}).items():
                print(f"  {key}: {value}", file=sys.stderr)
            return code
        except Exception as e:
            logger.exception("Unexpected error")
            print(f"Error: Unexpected error: {e}", file=sys.stderr)
            return EXIT_UNEXPECTED
        return EXIT_OK

    return wrapper
