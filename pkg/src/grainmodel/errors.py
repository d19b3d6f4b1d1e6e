"""Exception types shared across the package."""


class GrainModelError(Exception):
    """Base class for every error raised by this package."""


class GeometryError(GrainModelError, ValueError):
    """Plane/frame geometry is inconsistent or too small for the operation."""


class FormatError(GrainModelError, ValueError):
    """Malformed byte stream; carries the offset where parsing gave up."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class BadSignatureError(FormatError):
    """Stream does not start with the expected signature."""


class UnknownColorspaceError(FormatError):
    """Colorspace tag names a layout this package does not handle."""


class TruncatedStreamError(FormatError):
    """Stream ended before the advertised payload was complete."""


class BadMagicError(FormatError):
    """Model stream does not start with the PNM1 magic."""


class UnsupportedVersionError(FormatError):
    """Model stream carries a version this package cannot decode."""


class DegenerateSignalError(GrainModelError, ValueError):
    """Signal has no energy; linear prediction is undefined."""


class FilterInstabilityError(GrainModelError, ArithmeticError):
    """A reflection coefficient left the open unit interval."""
