"""Exception hierarchy shared by all modules.

The CLI maps ``ValidationError`` subclasses to exit code 2 and
``NumericalError`` subclasses to exit code 3.
"""


class ValidationError(ValueError):
    """Input or construction failed a contract check."""


class DomainError(ValidationError):
    """An argument lies outside the domain of an operation."""


class ConstructionError(ValidationError):
    """The family builder could not realise the requested ladder."""


class NumericalError(RuntimeError):
    """A quadrature, root find or integration failed to converge."""


class StiffnessError(NumericalError):
    def __init__(self, msg, y=None):
        super().__init__(msg if y is None else f"{msg} at y={y:.12g}")
        self.y = y


class UndefinedMapError(ValidationError):
    """A Poincare or release map has no value at the requested point."""
