"""Exception types shared across the package.

The command line front end maps these onto exit codes, so library code
should raise the most specific type that applies.
"""


class ModelError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(ModelError, ValueError):
    """A parameter or argument violates its documented domain."""


class FeasibilityError(ModelError, ValueError):
    """An allocation violates a feasibility constraint.

    The message names the violated constraint.
    """


class InfeasibleModelError(ModelError):
    """The feasible interior of a model instance is empty."""


class ConvergenceError(ModelError):
    """The solver stopped without meeting its residual tolerance.

    Carries the last iterate as a diagnostic in ``last`` (a
    :class:`~cbdc_portfolio.solver.Solution` with ``converged=False``).
    """

    def __init__(self, message: str, last=None):
        super().__init__(message)
        self.last = last


class BracketError(ModelError):
    """A calibration target lies outside the achievable range.

    ``achievable`` holds the (low, high) values the bracket endpoints
    produce.
    """

    def __init__(self, message: str, achievable=None):
        super().__init__(message)
        self.achievable = achievable


class EstimationError(ModelError):
    """Base class for panel estimation failures."""


class SeparationError(EstimationError):
    """The likelihood is unbounded along one column (quasi-separation).

    ``column`` names the offending regressor.
    """

    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


class RankDeficiencyError(EstimationError):
    """The design matrix is rank deficient.

    ``columns`` names a set of columns that are linearly dependent on
    the rest.
    """

    def __init__(self, message: str, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class SchemaError(ModelError, ValueError):
    """A config file or CSV input does not match its documented schema."""
