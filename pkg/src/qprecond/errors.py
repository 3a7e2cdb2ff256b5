"""Exception types shared across the package."""


class QPrecondError(Exception):
    """Base class for all package errors."""


class DimensionError(QPrecondError, ValueError):
    """Shapes or lengths of inputs do not agree."""


class InvalidParameterError(QPrecondError, ValueError):
    """A parameter violates its documented precondition."""


class CapacityError(QPrecondError, RuntimeError):
    """A problem exceeds the configured emulation capacity."""


class FormatError(QPrecondError, ValueError):
    """An input file could not be parsed."""


class IntegrityError(QPrecondError, ValueError):
    """Inputs are mutually inconsistent (duplicate entries, bad maps, ...)."""
