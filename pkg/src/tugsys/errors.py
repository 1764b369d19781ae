"""Exception hierarchy shared by all tugsys modules."""

from __future__ import annotations


class TugsysError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(TugsysError, ValueError):
    """Input rejected before any computation started."""


# markov
class GeneratorError(ValidationError):
    pass


class NotSquare(GeneratorError):
    pass


class RowSumViolation(GeneratorError):
    pass


class NonpositiveOffDiagonal(GeneratorError):
    pass


class ModeOutOfRange(ValidationError, IndexError):
    pass


# domain
class DegenerateDomain(ValidationError):
    pass


class SpacingTooCoarse(ValidationError):
    pass


class OutOfDomain(TugsysError, ValueError):
    pass


class NotInterior(TugsysError, ValueError):
    pass


class NotUnit(TugsysError, ValueError):
    pass


# exact
class NonpositiveRadius(ValidationError):
    pass


class OutOfBall(TugsysError, ValueError):
    pass


class StepTooLarge(ValidationError):
    pass


class OutOfAnnulus(TugsysError, ValueError):
    pass


# solver
class TooCloseToBoundary(TugsysError, ValueError):
    pass


# game
class StalledGame(TugsysError, RuntimeError):
    """Raised when an episode exceeds its step cap."""

    def __init__(self, message: str, episode: int | None = None):
        super().__init__(message)
        self.episode = episode


# analysis
class BallNotContained(TugsysError, ValueError):
    pass


class RadiusOrder(ValidationError):
    pass


# boundary expressions
class ExprSyntaxError(ValidationError):
    """Malformed boundary expression; ``offset`` is the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class UnknownIdentifier(ValidationError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at byte {offset}")
        self.name = name
        self.offset = offset


class EvalError(TugsysError, ArithmeticError):
    pass
