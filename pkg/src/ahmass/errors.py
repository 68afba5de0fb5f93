"""Exception types shared across the package."""


class AhmassError(Exception):
    """Base class for all package errors."""


class DomainError(AhmassError, ValueError):
    """An input lies outside the domain where a formula is defined."""


class OrderingError(AhmassError, ValueError):
    """Interval endpoints are given in the wrong order."""


class StencilError(AhmassError, ValueError):
    """The grid has too few nodes for the requested finite-difference stencil."""


class RegularityError(AhmassError, ValueError):
    """A derivative was requested of a profile that is only continuous."""


class MetricError(AhmassError, ValueError):
    """The metric is degenerate (a frame eigenvalue is not positive)."""


class AmplitudeError(AhmassError, ValueError):
    """A perturbation amplitude violates positivity or a smallness gate."""


class RangeError(AhmassError, ValueError):
    """Evaluation requested outside the sampled hull of a profile."""


class NormalizationError(AhmassError, ValueError):
    """A cutoff has vanishing integral."""


class FitError(AhmassError, ValueError):
    """Not enough data to perform a fit, or no feasible fit exists."""


class InstabilityError(AhmassError, RuntimeError):
    """Time integration lost positivity or grew beyond its gate."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time


class SamplingError(AhmassError, ValueError):
    """A history has too few snapshots for the requested diagnostic."""


class ConfigError(AhmassError, ValueError):
    """Experiment configuration failed validation."""
