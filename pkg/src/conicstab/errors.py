"""Exception hierarchy shared by every module."""


class ConicError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(ConicError, ValueError):
    pass


class OutsideChart(ConicError, ValueError):
    """Query outside the chart on which a cone is described in closed form."""


class NoConvergence(ConicError, RuntimeError):
    pass


class Unsupported(ConicError, NotImplementedError):
    pass


class NotMember(ConicError, ValueError):
    pass


class NotNormal(ConicError, ValueError):
    pass


class NotTangent(ConicError, ValueError):
    pass


class TooLarge(ConicError, RuntimeError):
    pass


class Infeasible(ConicError, ValueError):
    """The reference point does not satisfy g(ybar) in the cone."""


class NoMultiplier(ConicError, ValueError):
    pass


class NormalityViolation(ConicError, ValueError):
    pass


class OutsideTrustRegion(ConicError, ValueError):
    pass


class PDCUnavailable(ConicError, RuntimeError):
    pass


class NonPolyhedralCriticalCone(ConicError, RuntimeError):
    pass


class AssumptionsUnverified(ConicError, RuntimeError):
    pass


class ProblemFileError(ConicError, ValueError):
    """Malformed problem file; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
