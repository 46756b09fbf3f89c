"""Exception hierarchy shared by all stepgame modules."""


class StepGameError(Exception):
    """Base class for every error raised by this package."""


class InconsistentChain(StepGameError):
    pass


class DisconnectedEntity(StepGameError):
    pass


class ParseError(StepGameError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDirection(StepGameError):
    pass


class NoMatch(StepGameError):
    pass


class Ambiguous(StepGameError):
    pass


class InvalidK(StepGameError):
    pass


class InvalidE(StepGameError):
    pass


class LexiconExhausted(StepGameError):
    pass


class NoiseNotAllowed(StepGameError):
    """Supporting noise requested for a chain below the k threshold."""


class Unreachable(StepGameError):
    pass


class InconsistentStory(StepGameError):
    pass


class MissingMeta(StepGameError):
    pass


class CertificationError(StepGameError):
    pass


class DimensionMismatch(StepGameError):
    pass


class TokenOutOfRange(StepGameError):
    pass


class SentenceTooLong(StepGameError):
    pass
