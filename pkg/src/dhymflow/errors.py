"""Exception types shared across the package."""


class DhymError(Exception):
    """Base class for all package-specific errors."""


class DomainMismatch(DhymError):
    """Fields from different grid domains were combined."""


class PhaseSingular(DhymError):
    """The Lagrangian phase came within theta_guard of {0, pi}.

    cot(theta) blows up there; the continuum flow never reaches these
    values from admissible data, so hitting the guard signals a
    discretization failure rather than a recoverable condition.
    """


class NotSupercritical(DhymError):
    """The global angle theta_0 = Arg Z fell outside (0, pi)."""


class TlpfRangeViolation(DhymError):
    """tan(theta_0 - theta) left its admissible branch (-pi/2, pi/2)."""


class NonFinite(DhymError):
    """A NaN or infinity appeared in an evolving field."""


class MaxTimeExceeded(DhymError):
    """A run hit max_time before reaching the stationarity tolerance.

    Raised only on request; fixed-horizon runs report this through the
    result status instead so the partial series stays usable.
    """
