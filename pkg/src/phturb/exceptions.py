"""Exception hierarchy shared by every stage of the pipeline."""


class PhturbError(ValueError):
    """Base class for all library errors."""


# marketdata
class EmptyInput(PhturbError):
    pass


class MalformedRow(PhturbError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class NonPositivePrice(PhturbError):
    pass


class DuplicateDate(PhturbError):
    pass


class MissingValue(PhturbError):
    pass


class TooShort(PhturbError):
    pass


# embedding
class SeriesTooShort(TooShort):
    def __init__(self, length: int, required: int, what: str = "series"):
        self.length = length
        self.required = required
        super().__init__(f"{what} has length {length}; at least {required} required")


class TooFewPoints(TooShort):
    pass


class DateMisalignment(PhturbError):
    def __init__(self, first_mismatch, message: str | None = None):
        self.first_mismatch = first_mismatch
        super().__init__(message or f"date axes differ, first mismatch at {first_mismatch}")


# filtration / persistence
class DimensionTooLarge(PhturbError):
    pass


class InsufficientExpansion(PhturbError):
    pass


# landscape / diagmetrics
class InfinitePairPresent(PhturbError):
    pass


class DimensionMismatch(PhturbError):
    pass


class IncomparableEssentials(UserWarning):
    """Diagrams carry different numbers of infinite pairs; the distance is +inf."""


# indices
class ZeroVariance(PhturbError):
    pass


# analysis
class EmptyIntersection(PhturbError):
    pass


class KTooLarge(PhturbError):
    pass


class RangeTooSmall(PhturbError):
    pass


class TooFewRows(PhturbError):
    pass


class UnknownLabel(PhturbError, KeyError):
    def __str__(self):
        return ValueError.__str__(self)


class Misalignment(PhturbError):
    pass


# backtest
class BadLookback(PhturbError):
    pass


class BadQuintile(PhturbError):
    pass


class InsufficientHistory(PhturbError):
    pass
