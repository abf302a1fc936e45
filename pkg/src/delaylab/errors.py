"""Exception types shared across the package.

The CLI maps these onto its exit codes, so solver and report code should
raise the most specific class that applies.
"""


class DelayLabError(Exception):
    """Base class for all package-specific errors."""


class ScenarioError(DelayLabError, ValueError):
    """A scenario document failed to parse or validate."""


class PreconditionError(DelayLabError, ValueError):
    """An operation was called outside its stated preconditions."""


class BlowUpError(DelayLabError, RuntimeError):
    """A time integration exceeded the norm guard and was aborted."""


class NoResultError(DelayLabError, RuntimeError):
    """A search or scan finished without producing any result."""


class NearSpectrumError(DelayLabError, RuntimeError):
    """A resolvent was requested too close to the spectrum."""


class BudgetError(DelayLabError, RuntimeError):
    """A computation would exceed its configured work budget."""
