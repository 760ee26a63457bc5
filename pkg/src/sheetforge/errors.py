"""Exception taxonomy.

Every error raised deliberately by this package derives from SheetForgeError,
so callers (and the CLI) can distinguish domain failures from genuine bugs.
"""


class SheetForgeError(Exception):
    """Base class for all sheetforge domain errors."""


class OutOfRange(SheetForgeError, ValueError):
    """A numeric parameter is outside its documented domain."""


class DegenerateAngle(SheetForgeError, ValueError):
    """The Levy exponent real part vanishes at the requested angle (or one of
    its first m multiples), so the wave-kernel constants are undefined."""


class NodeNotOnLattice(SheetForgeError, ValueError):
    """A coordinate passed to a grid-field lookup is neither 0 nor a node."""


class PointNotOnEvalGrid(SheetForgeError, ValueError):
    """A coordinate passed to an approximation-field lookup is not on its
    evaluation grid (0 is always accepted and maps to the zero value)."""


class QuadratureFailure(SheetForgeError, ArithmeticError):
    """A quadrature routine could not meet its error target. Reported, never
    silently degraded."""


class ProfileViolation(SheetForgeError):
    """A kernel failed its declared squared-increment growth profile."""

    def __init__(self, message, pair=None, window=None, value=None, bound=None):
        super().__init__(message)
        self.pair = pair
        self.window = window
        self.value = value
        self.bound = bound


class InsufficientReplicates(SheetForgeError, ValueError):
    """Too few Monte Carlo replicates for the requested estimator."""


class UncoupledInputs(SheetForgeError, ValueError):
    """An operation requiring fields built from one shared sheet draw was
    given fields with unrelated provenance."""


class ConfigError(SheetForgeError, ValueError):
    """An experiment configuration is malformed or has unknown fields."""
