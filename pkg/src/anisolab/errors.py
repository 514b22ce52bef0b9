"""Exception types shared across the laboratory."""


class LabError(Exception):
    """Base class for all laboratory errors."""


class ChartDomainError(LabError):
    """A point left the chart domain, or sits too close to its boundary
    for the finite-difference stencil in use."""


class DegenerateMetricError(LabError):
    """The metric callback returned a matrix that is not symmetric
    positive definite at the requested point."""


class EllipticityError(LabError):
    """The tensor field failed a positivity requirement (its smallest
    eigenvalue over the sampled region is not positive)."""


class ODEBlowupError(LabError):
    """A radial ODE solution leaves the admissible window before the
    requested radius (trigonometric warp reaching its first zero, or a
    drift potential diverging)."""


class HypothesisWindowError(LabError):
    """A configured radius or parameter violates the admissibility
    window of the check that consumes it."""


class ShootingError(LabError):
    """No geodesic connecting the requested endpoints was found inside
    the chart (target unreachable, or the refinement failed to close)."""


class ConfigError(LabError):
    """Scenario text rejected: carries the 1-based line and column."""

    def __init__(self, message, line=None, col=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {col}" if col is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.col = col
