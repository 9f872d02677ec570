"""Exception types shared across the solver modules."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values or diverged."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class ConfigurationError(ValueError):
    """Solver constants are inconsistent with the problem."""
