"""Exception types shared across the package.

Loaders and statistics raise subclasses of :class:`DataError` so callers
(and the CLI) can separate bad inputs from bugs; configuration mistakes
raise :class:`ConfigError`.
"""


class DataError(ValueError):
    """Base class for invalid or inconsistent input data."""


class ParseError(DataError):
    """Malformed file content; the message carries file and line context."""


class DomainError(DataError):
    """A value outside its legal domain (negative TPM, negative time, ...)."""


class DuplicateError(DataError):
    """An identifier that must be unique appeared twice."""


class AlignmentError(DataError):
    """Inputs share no genes or no samples after intersection."""


class EmptyResultError(DataError):
    """A filter or reduction removed everything."""


class ConsistencyError(DataError):
    """Inputs disagree with stored model or mask metadata."""


class DegenerateError(DataError):
    """A statistic is undefined on this input (constant values, no events, ...)."""


class PipelineError(DataError):
    """A pipeline stage could not produce a usable intermediate result."""


class ConfigError(ValueError):
    """Invalid run configuration (thresholds, fold counts, layer sizes, ...)."""


class InitError(ConfigError):
    """Layer initialization is impossible (e.g. a mask column with no members)."""


class TrainingError(RuntimeError):
    """Training aborted; the message carries epoch/batch diagnostics."""
