"""Exception hierarchy shared across the package.

Domain/precondition violations derive from ValueError; runtime numerical
failures derive from NumericalError so the CLI can map them to a distinct
exit code.
"""


class UnreachableTargetError(ValueError):
    """Requested drive amplitude is at or beyond the critical point."""


class DegeneratePointError(ValueError):
    """Quantity is undefined at this drive amplitude (0 or 1)."""


class SpectrumUndefinedError(ValueError):
    """No discrete quasi-energy spectrum exists at or beyond the critical point."""


class BeyondCriticalError(ValueError):
    """Effective drive ratio exceeds 1; the dark-state mapping does not apply."""


class ConfigError(ValueError):
    """Invalid run configuration; carries the full list of problems found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NumericalError(RuntimeError):
    """Base class for runtime numerical failures (CLI exit code 3)."""


class AccuracyError(NumericalError):
    """Truncated construction lost too much norm; increase the Fock cutoff."""


class StiffnessError(NumericalError):
    """Integrator step size underflowed without meeting the step tolerance."""


class IntegrationFailureError(NumericalError):
    """Integration produced an unphysical state (trace drift, negativity, ...)."""


class ConditioningError(NumericalError):
    """Linear fit design matrix is too ill-conditioned to invert reliably."""

    def __init__(self, message, condition_number=None):
        self.condition_number = condition_number
        if condition_number is not None:
            message = f"{message} (condition number {condition_number:.3e})"
        super().__init__(message)
