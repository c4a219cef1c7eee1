"""Exception hierarchy shared by the toolkit.

The CLI maps :class:`ValidationError` (and subclasses) to exit code 2 and
:class:`NumericalError` (and subclasses) to exit code 3.
"""


class SiwsError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(SiwsError, ValueError):
    """Input violates a model assumption or a file schema."""


class StructuralError(ValidationError):
    """Shapes or structure of the input are inconsistent."""


class SchemaError(ValidationError):
    """A scenario file does not follow the documented schema."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field {field}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class PreconditionError(ValidationError):
    """A hypothesis required by an operation does not hold."""


class HypothesisError(PreconditionError):
    """A mitigation strategy's hypotheses are not met."""


class NumericalError(SiwsError, ArithmeticError):
    """An iterative numerical procedure failed."""


class IntegrationError(NumericalError):
    """The ODE integrator could not advance (e.g. step-size underflow)."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class DomainError(IntegrationError):
    """An accepted step left the sensible domain by more than the guard."""


class ConvergenceWarning(UserWarning):
    """A power iteration stopped before meeting its tolerance."""
