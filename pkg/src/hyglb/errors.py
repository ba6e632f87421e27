"""Exception types shared across the package."""


class DegenerateInstanceError(ValueError):
    """The instance violates a uniqueness/span requirement (e.g. tied best arm)."""


class ConstructionFailureError(RuntimeError):
    """An instance generator received parameters it cannot realize."""


class NotIdentifiableError(RuntimeError):
    """The available action features cannot identify the required functionals."""


class MleConvergenceError(RuntimeError):
    """Constrained MLE did not reach the requested optimality residual.

    Carries the best iterate so callers can decide whether it is usable.
    """

    def __init__(self, theta, residual, iterations):
        super().__init__(
            f"constrained MLE stopped after {iterations} iterations with "
            f"projected-gradient residual {residual:.3e}"
        )
        self.theta = theta
        self.residual = residual
        self.iterations = iterations
