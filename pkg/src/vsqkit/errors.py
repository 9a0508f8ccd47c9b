"""Exception types used across the file formats and CLI."""


class VsqkitError(Exception):
    """Base class for toolkit errors."""


class ValidationError(VsqkitError):
    """Inputs violate a documented contract (CLI exit code 1)."""


class FormatError(ValidationError):
    """A file's content does not match its declared format."""
