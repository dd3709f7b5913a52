"""Exception types shared across the package.

Each class carries a short ``category`` string; the CLI prints it so that
failures can be matched by scripts.
"""


class SympaeError(Exception):
    category = "error"


class DimensionError(SympaeError, ValueError):
    category = "dimension"


class SolverError(SympaeError, RuntimeError):
    """Nonlinear solve did not reach tolerance."""

    category = "solver"

    def __init__(self, message, residual=None, step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class LinearSolveError(SolverError):
    category = "linear-solve"


class RankDeficiencyError(SympaeError, ValueError):
    category = "rank"


class ManifoldError(SympaeError, ArithmeticError):
    """A point or tangent left its manifold beyond the allowed tolerance."""

    category = "manifold"


class TrainingError(SympaeError, RuntimeError):
    category = "training"


class ContainerError(SympaeError, ValueError):
    category = "container"


class ConfigError(SympaeError, ValueError):
    category = "config"
