"""Exception hierarchy. The CLI maps these onto exit codes."""


class AMFCCError(Exception):
    """Base class for package errors."""


class ConfigError(AMFCCError, ValueError):
    """Invalid or inconsistent configuration."""


class DataError(AMFCCError, ValueError):
    """Malformed, inconsistent, or insufficient input data."""


class DegenerateInputError(DataError):
    """Input that cannot identify the requested fit (e.g. fewer than 2 grid points)."""


class NumericError(AMFCCError, ArithmeticError):
    """A numerical procedure failed (non-finite solve, failed factorization)."""


class ModelFormatError(DataError):
    """A serialized model is corrupt or has an unsupported format version."""


class DegenerateModelWarning(UserWarning):
    """An MFPCA fit has no usable variance."""
