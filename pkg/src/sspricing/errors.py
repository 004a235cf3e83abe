"""Exception types shared across the package."""


class SSPricingError(Exception):
    """Base class for every package-specific error."""


class ModelInvalid(SSPricingError, ValueError):
    """A demand or cost model violates a construction invariant."""


class PriceOutOfBounds(SSPricingError, ValueError):
    """A price query fell outside [p_min, p_max]."""


class UndefinedAtZero(SSPricingError, ValueError):
    """The holding-cost derivative was requested at z = 0 where it may not exist."""


class SolverError(SSPricingError):
    """Base class for failures of the marginal-value solver."""


class RootBracketFailure(SolverError):
    """A bracketing search for a scalar root ran out of room."""


class BlowUp(SolverError):
    """The integrated marginal value exceeded the divergence guard.

    Carries ``z_reached``, the location where integration was abandoned.
    """

    def __init__(self, message, z_reached=None):
        super().__init__(message)
        self.z_reached = z_reached


class StepUnderflow(SolverError):
    """Adaptive step control shrank the step below the hard floor."""

    def __init__(self, message, z_reached=None):
        super().__init__(message)
        self.z_reached = z_reached


class NoBand(SolverError):
    """The integrated marginal value never rises above the unit order cost."""


class NoSolution(SolverError):
    """No average-profit rate satisfies the band-area condition."""


class OutOfRange(SolverError, ValueError):
    """A query left the domain covered by a solution fragment."""


class VerificationFailed(SSPricingError):
    """An optimality check exceeded its tolerance.

    Carries the offending location(s) in ``details`` for diagnostics.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class ConfigInvalid(SSPricingError, ValueError):
    """A run configuration failed validation before any computation."""


class SpecInvalid(SSPricingError, ValueError):
    """A chain discretization request is inconsistent."""


class NoConvergence(SSPricingError):
    """Value iteration hit its sweep budget before the stopping rule.

    ``span_history`` records the span sequence for diagnosis.
    """

    def __init__(self, message, span_history=None):
        super().__init__(message)
        self.span_history = list(span_history) if span_history is not None else []
