"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InfeasibleError(RuntimeError):
    """No admissible solution exists (e.g. a normalizer cannot reach mass one)."""


class NoSolutionError(RuntimeError):
    """An iterative solver exhausted its restarts without converging."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
