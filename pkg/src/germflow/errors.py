"""Exception hierarchy. Every error raised on purpose derives from GermflowError."""


class GermflowError(Exception):
    pass


class ShapeMismatch(GermflowError, ValueError):
    pass


class NotAGerm(GermflowError, ValueError):
    """A map or field has a nonzero constant term where a germ is required."""


class SingularLinearPart(GermflowError, ValueError):
    pass


class NonDiagonalLinearPart(GermflowError, ValueError):
    pass


class NearResonance(GermflowError, ArithmeticError):
    """A non-resonant divisor is too small to divide by safely."""

    def __init__(self, message, component=None, alpha=None, divisor=None):
        super().__init__(message)
        self.component = component
        self.alpha = alpha
        self.divisor = divisor


class SeriesNotConverged(GermflowError, ArithmeticError):
    pass


class FlowPostconditionError(GermflowError, ArithmeticError):
    """The computed time-t map disagrees with exp(tA) in its linear part."""


class PrimitivityFailed(GermflowError, ValueError):
    pass


class NonScalarLinearPart(GermflowError, ValueError):
    pass


class HypothesisViolated(GermflowError, ValueError):
    pass


class DomainExit(GermflowError, RuntimeError):
    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class StepUnderflow(GermflowError, RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t
