"""Exception hierarchy for the calibration toolkit."""


class SelfCalError(Exception):
    """Base class for every error raised by :mod:`selfcal`."""


class StructuralInputError(SelfCalError, ValueError):
    """Adjacency or index data that is malformed (asymmetric, self-loops, out of range)."""


class IneffectiveStrategyError(SelfCalError):
    """Some ordinary antenna has no calibration path to the reference."""


class NotATreeError(SelfCalError):
    """Operation requires a spanning tree (connected, exactly M-1 lines)."""


class EnumerationCapError(SelfCalError):
    """Exhaustive enumeration was requested above the configured size cap."""


class SingularFisherError(SelfCalError, ArithmeticError):
    """Fisher information matrix is singular or too ill-conditioned to invert."""


class AmplitudeAssumptionError(SelfCalError, ValueError):
    """Gains violate the equal-amplitude assumption needed by a closed form."""


class PreconditionError(SelfCalError, ValueError):
    """An operation's documented precondition does not hold."""


class PropagationSingularityError(SelfCalError, ArithmeticError):
    """A recursive estimator hit a (near) zero intermediate estimate."""


class DegenerateMeasurementError(SelfCalError, ArithmeticError):
    """A measurement used as a divisor is zero."""


class SingularCompensationError(SelfCalError, ArithmeticError):
    """A calibration coefficient used for compensation is zero."""


class RankDeficientError(SelfCalError, ArithmeticError):
    """Zero-forcing Gram matrix is not invertible."""
