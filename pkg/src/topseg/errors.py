"""Exception types shared across the toolkit."""


class TopsegError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(TopsegError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ContractError(TopsegError, ValueError):
    """A documented precondition was violated by the caller."""


class ConfigError(TopsegError, ValueError):
    """A configuration object fails validation."""


class DataValidationError(TopsegError, ValueError):
    """A document or corpus violates a structural invariant."""


class FormatError(TopsegError, ValueError):
    """Base class for binary/JSON file format errors."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class TruncatedFileError(FormatError):
    """File ended before a complete record could be read."""


class DimensionMismatchError(FormatError):
    """Stored payload size disagrees with the declared dimensions."""


class DuplicateDocError(FormatError):
    """The same document id occurs more than once in a store."""


class TrainingDivergedError(TopsegError, RuntimeError):
    """Training produced a non-finite loss or gradient."""


class UsageError(TopsegError, ValueError):
    """Command line arguments are missing, unknown, or inconsistent."""
