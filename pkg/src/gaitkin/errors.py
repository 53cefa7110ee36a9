"""Exception hierarchy shared by every pipeline stage."""


class GaitkinError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(GaitkinError):
    """Malformed input document.

    ``offset`` is a byte offset for JSON documents, ``line`` a 1-based line
    number for line-oriented formats. Either may be None.
    """

    def __init__(self, message, *, offset=None, line=None):
        where = []
        if offset is not None:
            where.append(f"byte {offset}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.offset = offset
        self.line = line


class CalibrationError(GaitkinError):
    pass


class BehindCameraError(GaitkinError):
    pass


class DivergenceError(GaitkinError):
    pass


class InsufficientViewsError(GaitkinError):
    pass


class DegenerateGeometryError(GaitkinError):
    pass


class AlignmentError(GaitkinError):
    pass


class ParameterError(GaitkinError, ValueError):
    pass


class GapError(GaitkinError):
    pass


class PoseError(GaitkinError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ScalingError(GaitkinError):
    pass


class UnconstrainedError(GaitkinError):
    """Too few positively weighted markers to determine the pose."""


class NumericalError(GaitkinError):
    pass


class NoGaitError(GaitkinError):
    pass


class SpanError(GaitkinError, ValueError):
    pass


class NoCycleError(GaitkinError):
    pass


class DataError(GaitkinError):
    pass


class ShapeError(GaitkinError, ValueError):
    pass


class UndefinedCorrelationError(GaitkinError, ValueError):
    pass


class PairingError(GaitkinError):
    pass
