from typing import Optional, Dict, Any, Callable
from loguru import logger
import traceback
from datetime import datetime
from pydantic import BaseModel
import functools

from app.utils.log_sinks import add_file_sink

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERIFICATION = 2

# Errors caused by bad input: unknown codes, bad configs, missing files
CONFIG_ERRORS = {
    "ConfigError",
    "CatalogError",
    "MissingSweepData",
    "ConstructionError",
    "ValidationError",
    "FileNotFoundError",
    "ValueError",
    "KeyError",
}
VERIFICATION_ERRORS = {
    "VerificationFailed",
    "CssConstructionError",
    "DecoderSetupError",
}


class VerificationFailed(Exception):
    """A check over constructed codes did not hold."""


class ErrorDetail(BaseModel):
    timestamp: datetime
    error_type: str
    message: str
    stack_trace: Optional[str] = None
    additional_info: Dict[str, Any] = {}


class ErrorHandler:
    def __init__(self):
        add_file_sink("error", level="ERROR")

    def handle_error(self, error: Exception, context: Dict[str, Any] = None) -> ErrorDetail:
        """Log an error with its context and return it as a record."""
        try:
            error_detail = ErrorDetail(
                timestamp=datetime.now(),
                error_type=type(error).__name__,
                message=str(error),
                stack_trace=traceback.format_exc(),
                additional_info=context or {}
            )

            logger.error(
                f"Error: {error_detail.error_type}\n"
                f"Message: {error_detail.message}\n"
                f"Context: {error_detail.additional_info}\n"
                f"Stack Trace: {error_detail.stack_trace}"
            )

            return error_detail

        except Exception as e:
            logger.error(f"Error in error handler: {str(e)}")
            return ErrorDetail(
                timestamp=datetime.now(),
                error_type="ErrorHandlerFailure",
                message=str(e)
            )

    def format_user_message(self, error_detail: ErrorDetail) -> str:
        """One-line diagnostic for the terminal."""
        if error_detail.error_type in VERIFICATION_ERRORS:
            return f"Verification failed: {error_detail.message}"
        elif error_detail.error_type == "MissingSweepData":
            return f"Missing sweep data: {error_detail.message}"
        elif error_detail.error_type in CONFIG_ERRORS:
            return f"Invalid input: {error_detail.message}"
        else:
            return f"Unexpected {error_detail.error_type}: {error_detail.message}"

    def exit_code_for(self, error_detail: ErrorDetail) -> int:
        if error_detail.error_type in VERIFICATION_ERRORS:
            return EXIT_VERIFICATION
        return EXIT_CONFIG

    def cli_error_handler(self, func: Callable[..., int]) -> Callable[..., int]:
        """Turn exceptions escaping a subcommand into a diagnostic and an exit code."""
        @functools.wraps(func)
        def wrapper(*args, **kwargs) -> int:
            try:
                return func(*args, **kwargs)
            except Exception as e:
                error_detail = self.handle_error(e, {"command": func.__name__})
                print(self.format_user_message(error_detail))
                return self.exit_code_for(error_detail)
        return wrapper
