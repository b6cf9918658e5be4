"""Exception hierarchy shared by the numerical modules and the CLI."""


class DomainError(ValueError):
    """Argument outside the domain of a function."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure (CLI exit code 2)."""


class ConvergenceError(NumericalError):
    """Adaptive procedure ran out of budget before meeting its tolerance.

    The best estimate reached so far is kept on ``estimate`` together with
    its error bound ``error``.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class BracketError(NumericalError):
    """Function values at both ends of a bracket have the same sign."""


class InfeasibleConstraintError(NumericalError):
    """No power policy can satisfy the requested constraint set."""


class UnresolvedPolicyError(ValueError):
    """A policy that needs a cutoff threshold was used without one."""


class DegenerateResultError(NumericalError):
    """Effective capacity is undefined because the moment underflowed."""
