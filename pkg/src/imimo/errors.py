"""Exception types raised by the library."""


class InvalidArgumentError(ValueError):
    """An argument is outside the documented domain."""


class NumericalDomainError(ArithmeticError):
    """A quadrature integrand produced a non-finite value."""

    def __init__(self, message, node_index=None):
        super().__init__(message)
        self.node_index = node_index


class UnsupportedDimensionError(InvalidArgumentError):
    """The nested-quadrature evaluator was asked for too many rounds."""


class UnsupportedSchemeError(InvalidArgumentError):
    """The operation is not defined for the requested scheme."""


class InternalError(RuntimeError):
    """An invariant that should hold for valid input was violated."""
