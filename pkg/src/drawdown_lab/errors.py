"""Exception hierarchy shared by the analytic, numerical and simulation layers."""


class DrawdownLabError(Exception):
    """Base class for every error raised by this package."""


class DomainViolation(DrawdownLabError, ValueError):
    """An argument lies outside the state interval or the law's parameter range."""


class GeometryViolation(DomainViolation):
    """Levels are not ordered the way the requested law requires."""


class NonPositiveDiffusion(DomainViolation):
    """The diffusion coefficient vanished or went negative on a sampled point."""


class EigenfunctionUnavailable(DrawdownLabError):
    """The model cannot supply the increasing/decreasing eigenfunctions at this rate."""


class NumericalError(DrawdownLabError, ArithmeticError):
    """Base class for failures of a numerical routine."""


class MaxDepthExceeded(NumericalError):
    """Adaptive quadrature ran out of subdivisions before meeting its tolerance."""

    def __init__(self, message, value=float("nan"), error=float("inf")):
        super().__init__(message)
        self.value = value
        self.error = error


class TailNotDecaying(NumericalError):
    """The survival witness of an infinite integral never dropped below threshold."""


class NonConvergence(NumericalError):
    """An iterative solver (shooting, anchor doubling) did not stabilise."""


class WindowTooWide(NumericalError):
    """A far-field anchor would leave the state interval."""


class DivergentAcceleration(NumericalError):
    """Successive inversion orders disagree or the output left its a-priori bounds."""


class HorizonTooShort(NumericalError):
    """Too many simulated paths were right-censored by the simulation horizon."""


class NonFiniteState(NumericalError):
    """A simulated path left the state interval or produced a non-finite value."""
