"""Exception hierarchy."""


class SheetSliceError(Exception):
    """Base class for all sheetslice errors."""


class ConfigurationError(SheetSliceError, ValueError):
    """Invalid grid, experiment or command-line configuration."""


class DomainError(SheetSliceError, ValueError):
    """An operation was called outside its precondition."""


class InconclusiveError(SheetSliceError):
    """A classification could not be decided (e.g. no tail model for a gauge)."""


class MergeError(SheetSliceError):
    """Two experiment reports cannot be pooled."""
