"""Exception types shared across the package."""


class GlassMapError(Exception):
    """Base class for all glassmap errors."""


class MalformedInputError(GlassMapError):
    """Input data violates a structural precondition (bad ring id, mixed grids, ...)."""


class DrpcError(MalformedInputError):
    """Base for DRPC file problems. Carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DrpcVersionError(DrpcError):
    """File declares an unsupported DRPC version."""


class DrpcRecordError(DrpcError):
    """A data record is truncated or inconsistent with the header."""


class DrpcChecksumError(DrpcError):
    """The checksum trailer does not match the file body."""


class ConfigError(GlassMapError):
    """Unknown or invalid configuration key/value."""


class InternalInvariantError(GlassMapError):
    """A should-never-happen condition; maps to exit code 4 in the CLI."""
