"""Exception types shared across the package."""


class Error(Exception):
    """Base class for all noseaug errors."""


class ConfigurationError(Error):
    """A spec, config object, or hyperparameter is invalid or inconsistent."""


class InputError(Error):
    """Runtime data handed to an operation violates its contract."""


class ValidationError(Error):
    """Loaded or constructed data fails an integrity check."""


class CsvParseError(Error):
    """A CSV file could not be parsed. Carries the 1-based file line."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateClassError(Error):
    """A class has too few samples for the requested estimator."""
