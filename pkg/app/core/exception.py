import sys
import logging


def error_message_detail(error: Exception, error_detail: sys) -> str:
    """
    Extract detailed error information including file name, line number, and the error message.

    Args:
        error (Exception): The exception (or message) that occurred.
        error_detail (sys): The sys module to access traceback details.

    Returns:
        str: Formatted error message string.
    """
    _, _, exc_tb = error_detail.exc_info()

    if exc_tb is not None:
        file_name = exc_tb.tb_frame.f_code.co_filename
        line_number = exc_tb.tb_lineno
        error_message = (
            f"Error occurred in file: [{file_name}] "
            f"at line number [{line_number}] "
            f"with error: {str(error)}"
        )
    else:
        error_message = f"Error occurred: {str(error)} (no traceback available)"

    logging.getLogger("marketgraph").debug(error_message)
    return error_message


class AppException(Exception):
    """
    Application-level exception for standardized error handling.

    The raw message stays available as ``reason`` so callers (the CLI, tests)
    can match on it without the traceback decoration.
    """

    def __init__(self, error_message, error_detail: sys = sys):
        """
        Args:
            error_message (str | Exception): What went wrong.
            error_detail (sys): The sys module to access traceback details.
        """
        super().__init__(str(error_message))
        self.reason = str(error_message)
        self.error_message = error_message_detail(error_message, error_detail)

    def __str__(self) -> str:
        return self.error_message

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.reason!r})"


class MarketInputError(AppException):
    """Invalid instance, index, edge set or violated precondition."""


class OracleLimitError(MarketInputError):
    """A brute-force oracle was asked to enumerate past its size guard."""


class VerificationError(AppException):
    """A requested certification did not hold."""


class InvariantError(AppException):
    """An internal invariant broke; always signals a bug."""
