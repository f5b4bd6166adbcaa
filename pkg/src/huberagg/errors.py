"""Exception types shared across the package.

The CLI maps these onto exit codes: validation problems exit with 2,
solver/path failures with 3.
"""


class DomainError(ValueError):
    """Invalid input: bad shapes, non-finite values, out-of-range parameters."""


class SolverError(RuntimeError):
    """An iterative solver failed to reach the requested tolerance."""

    def __init__(self, message, kkt_residual=None):
        super().__init__(message)
        self.kkt_residual = kkt_residual


class PathError(RuntimeError):
    """The homotopy path tracker hit a degenerate configuration it cannot resolve."""
