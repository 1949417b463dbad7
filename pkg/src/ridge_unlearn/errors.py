"""Exception hierarchy shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class ContractError(ValueError):
    """A documented precondition of an algorithm was violated."""


class NumericalError(ArithmeticError):
    """A computation diverged, lost precision, or hit a degenerate case."""


class SeriesOverflowError(NumericalError):
    """A series expansion would need more terms than the configured cap."""


class NoRootError(NumericalError):
    """Bracket expansion failed to enclose the requested target value."""
