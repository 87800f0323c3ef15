"""Exception hierarchy shared across the package."""


class HriLoopError(Exception):
    """Base class for all package errors."""


class SkeletonError(HriLoopError):
    """Malformed skeleton definition or pose/skeleton mismatch."""


class DegenerateGeometryError(HriLoopError):
    """Geometric routine received an input with no well-defined solution."""


class SequenceError(HriLoopError):
    """Motion sequence violates its timing or shape contract."""


class VocabularyError(HriLoopError):
    """Command text is not present in the embedding vocabulary."""


class ShapeError(HriLoopError):
    """Tensor or field shape inconsistent with the declared contract."""


class DataFormatError(HriLoopError):
    """On-disk record is malformed; carries the offending record index."""

    def __init__(self, message: str, record_index: int | None = None):
        super().__init__(message)
        self.record_index = record_index


class RetargetError(HriLoopError):
    """Retargeting could not produce a valid result."""


class ProtocolError(HriLoopError):
    """Wire message violates the framing or schema contract."""


class AdaptationError(HriLoopError):
    """Fine-tuning input does not satisfy its precondition."""
