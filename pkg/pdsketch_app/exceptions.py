"""
Exception hierarchy for the PDSketch toolkit.

Every error raised by the toolkit derives from `PDSketchError`, so management
commands can translate any of them into a `CommandError` with the right exit
code. Errors tied to a source position carry `line` and `col`; dataset errors
carry the offending line number and episode id.

`ValidationError` additionally derives from Django's own ValidationError, so
it carries a list of messages (one per violation) exactly like a form error.
"""

from django.core.exceptions import ValidationError as DjangoValidationError


class PDSketchError(Exception):
    """Base class for all toolkit errors."""


# ------------------------------------------------------------------------------
# LANGUAGE
# ------------------------------------------------------------------------------

class PositionalError(PDSketchError):
    """An error located at a line/column of some source text."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{message} (line {line}, col {col})"
        super().__init__(message)


class LexError(PositionalError):
    pass


class ParseError(PositionalError):
    pass


class DesugarError(PDSketchError):
    pass


class ValidationError(DjangoValidationError, PDSketchError):
    """
    Raised by domain validation with the complete list of violations.

    Attributes:
        messages (list[str]): One entry per violation, in discovery order.
    """

    def __str__(self):
        return "; ".join(self.messages)


# ------------------------------------------------------------------------------
# DOMAIN MODEL / SLOTS
# ------------------------------------------------------------------------------

class UnknownSlot(PDSketchError):
    pass


class SignatureMismatch(PDSketchError):
    pass


class UnboundSlot(PDSketchError):
    pass


class ConfigError(PDSketchError):
    pass


class ParamIOError(PDSketchError):
    pass


class FormatVersionMismatch(ParamIOError):
    pass


class MissingSlot(ParamIOError):
    pass


# ------------------------------------------------------------------------------
# AUTODIFF
# ------------------------------------------------------------------------------

class ShapeMismatch(PDSketchError):
    pass


class NonScalarRoot(PDSketchError):
    pass


# ------------------------------------------------------------------------------
# EVALUATION
# ------------------------------------------------------------------------------

class UnknownObjectConstant(PDSketchError):
    pass


class AssignToDerived(PDSketchError):
    pass


class EffectConflict(PDSketchError):
    pass


class NonBooleanGoal(PDSketchError):
    pass


# ------------------------------------------------------------------------------
# DATA / TRAINING
# ------------------------------------------------------------------------------

class DatasetIOError(PDSketchError):
    pass


class SchemaError(PDSketchError):
    """A malformed dataset record."""

    def __init__(self, message, line=None, episode_id=None):
        self.line = line
        self.episode_id = episode_id
        where = []
        if line is not None:
            where.append(f"line {line}")
        if episode_id is not None:
            where.append(f"episode {episode_id}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class GoalParseError(PDSketchError):
    pass


# ------------------------------------------------------------------------------
# DISCRETIZATION
# ------------------------------------------------------------------------------

class EmptyInput(PDSketchError):
    pass


class KTooLarge(PDSketchError):
    pass


class MissingCodebook(PDSketchError):
    pass


class Inseparable(PDSketchError):
    pass


class MissingRule(PDSketchError):
    pass


# ------------------------------------------------------------------------------
# SEARCH / SIMULATION
# ------------------------------------------------------------------------------

class LimitExceeded(PDSketchError):
    """Search stopped by the node or time limit; `stats` holds partial counts."""

    def __init__(self, message, stats=None):
        self.stats = stats
        super().__init__(message)


class Unsolvable(PDSketchError):
    def __init__(self, message, stats=None):
        self.stats = stats
        super().__init__(message)


class GridConfigError(ConfigError):
    pass
