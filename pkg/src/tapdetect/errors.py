"""Exception hierarchy shared across the toolkit.

Each subclass carries the process exit code the command-line frontend maps
it to, so library call sites raise one specific error and the frontend
stays a thin translation layer.
"""

from __future__ import annotations


class TapDetectError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class MissingInputError(TapDetectError):
    """A required input file or directory does not exist."""

    exit_code = 2


class AnnotationParseError(TapDetectError):
    """An annotation stream violates the documented schema."""

    exit_code = 3

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(TapDetectError):
    """A configuration value is out of range or unrecognized."""

    exit_code = 3


class AudioDecodeError(TapDetectError):
    """A WAV payload cannot be decoded (bad container, codec, or truncation)."""

    exit_code = 2


class TrainingError(TapDetectError):
    """Training or split construction cannot proceed (e.g. single-class data)."""

    exit_code = 4


class InferenceError(TapDetectError):
    """Model and input disagree on shape or feature layout."""

    exit_code = 5


class ModelFormatError(TapDetectError):
    """A serialized model file is corrupt or incompatible."""

    exit_code = 5
