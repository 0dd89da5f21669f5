"""Exception hierarchy shared by every module."""


class IdefrontError(Exception):
    """Base class for all library errors."""


class DomainError(IdefrontError, ValueError):
    """An exponential weight lies outside the kernel's abscissa of convergence."""


class RangeError(IdefrontError, ValueError):
    """A geometric parameter (patch breakpoint, grid size) is out of range."""


class ParseError(IdefrontError):
    """A configuration file could not be parsed or is missing a block."""


class ValidationError(IdefrontError, ValueError):
    """A parsed value violates a model invariant."""


class SchemaError(IdefrontError, ValueError):
    """A CSV input does not have the expected columns."""


class ConvergenceError(IdefrontError, RuntimeError):
    """An iterative procedure hit its cap or detected divergence."""


class NoSpeedError(IdefrontError):
    """The zero-weight eigenvalue is <= 1, so there is no positive speed."""


class UnboundedError(IdefrontError):
    """ln(lambda(mu))/mu is still decreasing at the abscissa of convergence."""


class SingularSystemError(IdefrontError, ArithmeticError):
    """lambda_0(mu0) is too close to the competitor's eigenvalue to solve for phi_2."""


class PositivityError(IdefrontError, ArithmeticError):
    """A solution that must be strictly positive has a nonpositive entry."""


class InconclusiveError(ConvergenceError):
    """The Weinberger recursion did not stabilise within its iteration cap."""


class FrontLostError(IdefrontError):
    """The tracked front reached the right guard band."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class InsufficientDataError(IdefrontError, ValueError):
    """Not enough trajectory data to build a travelling-wave profile."""
