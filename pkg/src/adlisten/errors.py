"""Exception types shared across the package."""


class AdListenError(Exception):
    """Base class for all package-specific errors."""


class SpeakerMismatch(AdListenError):
    pass


class TimeOrderViolation(AdListenError):
    pass


class ZeroMass(AdListenError):
    pass


class UnsupportedFormat(AdListenError):
    pass


class TooShort(AdListenError):
    pass


class LengthMismatch(AdListenError):
    pass


class EmptyCorpus(AdListenError):
    pass


class ShapeMismatch(AdListenError):
    pass


class EmptySequence(AdListenError):
    pass


class EmptyBatch(AdListenError):
    pass


class EmptyDataset(AdListenError):
    pass


class FormatVersionMismatch(AdListenError):
    pass


class WrongArity(AdListenError):
    pass


class AlignmentError(AdListenError):
    pass


class EmptyBlock(AdListenError):
    pass


class EmptyUtterance(AdListenError):
    pass


class ClockRegression(AdListenError):
    pass


class ProtocolViolation(AdListenError):
    pass


class DimMismatch(AdListenError):
    pass


class BindError(AdListenError):
    pass


class FeatureParseError(AdListenError):
    """CSV feature file parse failure; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
