"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An input violates an operation's precondition."""


class OverflowGuardError(ArithmeticError):
    """Requested evolution would overflow double precision.

    Raised before evaluating hyperbolic factors with argument beyond ~700,
    where the successful-post-selection probability has underflowed anyway.
    """


class PostSelectionUnderflowError(ArithmeticError):
    """Successful-post-selection probability fell below the representable range."""


class FitError(RuntimeError):
    """A least-squares fit could not be carried out (too few or degenerate samples)."""


class EmptyEnsembleError(RuntimeError):
    """All Monte Carlo shots failed post-selection."""

    def __init__(self, message, fraction_selected=0.0):
        super().__init__(message)
        self.fraction_selected = fraction_selected
