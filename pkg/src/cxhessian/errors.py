"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class RefinementError(ValueError):
    """The grid spacing is too coarse for the requested shape or kernel."""


class EmptyDomainError(ValueError):
    """An erosion or rasterization produced a domain with no interior nodes."""


class HypothesisViolation(RuntimeError):
    """The limit-at-infinity guard required by the existence/comparison
    statements fails; the requested operation refuses to run."""

    def __init__(self, message, limit=None, psi_sup=None):
        super().__init__(message)
        self.limit = limit
        self.psi_sup = psi_sup


class ScheduleError(RuntimeError):
    """A smoothing-radius schedule cannot be realized at the current grid
    resolution.  Carries the range of achievable stages."""

    def __init__(self, message, achievable=0):
        super().__init__(message)
        self.achievable = achievable
