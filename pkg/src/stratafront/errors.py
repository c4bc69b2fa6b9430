"""Exception hierarchy shared by all solver modules."""


class StratafrontError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(StratafrontError, ValueError):
    """An argument lies outside the documented domain of an operation."""


class UnsupportedRepresentationError(StratafrontError, TypeError):
    """The medium representation cannot be used by this code path.

    Typically raised when a pure Dirac comb reaches a grid-based routine;
    mollify the comb first or use the analytic comb dispersion instead.
    """


class NumericalFailureError(StratafrontError, RuntimeError):
    """An iterative solver failed to converge or to bracket a root.

    Carries whatever diagnostic the solver had at the point of failure
    (last residual, probe table, iteration count).
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class EstimationError(StratafrontError, RuntimeError):
    """A post-processing estimate (front fit, level set) has too little data."""
