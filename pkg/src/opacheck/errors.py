"""Exception types shared across the package."""


class OpacheckError(Exception):
    """Base class for all errors raised by this package."""


class UnknownLabel(OpacheckError):
    """A label has no entry in the observation map."""


class UnknownAtom(OpacheckError):
    """An atomic proposition cannot be resolved against the model."""


class UnsupportedPathForm(OpacheckError):
    """Path formula shape the checker does not dispatch on (bot, raw negation)."""


class PropertySyntaxError(OpacheckError):
    """Syntax error in a property string, with position information."""

    def __init__(self, message, line=1, column=1):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class InvalidWalk(OpacheckError):
    """A lasso expression does not trace a walk of the model."""


class DivergentCycle(OpacheckError):
    """A starred cycle has probability 1; its geometric sum diverges."""


class ResourceLimit(OpacheckError):
    """A construction exceeded its configured state cap."""


class SingularSystem(OpacheckError):
    """The reachability linear system degenerated (guarded, should not occur)."""


class NonConvergence(OpacheckError):
    """Power iteration failed to converge within the iteration budget."""

    def __init__(self, message, last_estimate=None):
        super().__init__(message)
        self.last_estimate = last_estimate


class LdtmcSyntaxError(OpacheckError):
    """Syntax error in an ldtmc model file."""

    def __init__(self, message, line=1, column=1):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class DuplicateDeclaration(OpacheckError):
    """A name is declared twice in an ldtmc source."""


class UndeclaredIdentifier(OpacheckError):
    """An ldtmc expression references an undeclared name."""


class OverlappingGuards(OpacheckError):
    """Two commands are enabled in the same state; the chain would not be deterministic."""


class LabelDeterminismViolation(OpacheckError):
    """One state has two transitions with the same label and different targets."""


class StateCapExceeded(OpacheckError):
    """State-space expansion exceeded the configured cap."""


class ExpansionError(OpacheckError):
    """A guarded command produced an invalid update (out of range, bad probability)."""
