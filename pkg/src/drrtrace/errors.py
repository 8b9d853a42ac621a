"""Exception types raised by drrtrace."""


class DrrTraceError(Exception):
    """Base class for all drrtrace errors."""


class InvalidArgumentError(DrrTraceError, ValueError):
    """An argument violates a documented precondition."""


class HeaderParseError(DrrTraceError):
    """A volume/image header could not be parsed.

    ``offset`` is the byte offset in the file where parsing failed.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class CorruptFileError(DrrTraceError):
    """File contents disagree with the sizes declared in the header."""


class DegenerateRayError(DrrTraceError):
    """A ray has zero length (source coincides with a detector pixel)."""


class MetricUndefinedError(DrrTraceError):
    """An image similarity metric is undefined for the given inputs."""


class GradientUndefinedError(DrrTraceError):
    """The pose gradient is undefined at the requested parameters."""
