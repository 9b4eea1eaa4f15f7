"""Exception types shared across the package."""


class JerxError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(JerxError):
    """A corpus or binary file could not be parsed.

    Carries a human-readable location (line number, record index or byte
    offset) so bad inputs can be found quickly.
    """

    def __init__(self, message, location=None):
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)
        self.location = location


class InvariantViolation(JerxError):
    """Ingested data violates a documented corpus invariant."""


class OverlappingSpans(InvariantViolation):
    """Two entity spans in the same annotation overlap."""


class SpanOutOfBounds(InvariantViolation):
    """An entity span extends outside its sentence."""


class UnknownLabel(JerxError):
    """A tag string is not part of the BIOES label vocabulary."""


class CorpusTooSmall(JerxError):
    """Not enough sentences to build the requested fold layout."""


class DimensionMismatch(JerxError):
    """Array shapes are inconsistent with the declared model dimensions."""


class MissingEmbeddingRecord(JerxError):
    """No embedding record exists for the requested sentence key."""


class LabelOutOfRange(JerxError):
    """A gold label index falls outside the score matrix width."""


class NonFiniteLoss(JerxError):
    """Training produced a NaN or infinite loss."""


class EmptyInput(JerxError):
    """An aggregation was asked to summarize zero items."""
