"""Exception hierarchy shared by every percoz module."""
from __future__ import annotations

from typing import Iterable, List


class PercozError(Exception):
    """Base class for errors raised by percoz itself."""


class DomainError(PercozError, ValueError):
    """A lattice point lies outside the box or too close to its shell."""


class IndeterminateFillError(DomainError):
    """The cluster touches the box shell, so its holes are not decided by the window."""


class ContractViolation(PercozError, ValueError):
    """An input breaks the documented precondition of an operation."""


class BudgetExceeded(PercozError):
    """An exhaustive computation would exceed its configured budget."""


class InsufficientStatistics(PercozError):
    """A conditional estimator saw too few conditioning events to report a number."""


class SingularCovarianceError(PercozError, ValueError):
    """The tilted covariance matrix is not positive definite."""


class TiltError(PercozError, ValueError):
    """No tilt on {F = 1} exists along the requested ray."""


class GeneratingOverflow(PercozError, OverflowError):
    """A tilted sum exceeds the magnitude cap."""


class FitError(PercozError, ValueError):
    """Too few usable points, or an ill-conditioned least-squares problem."""


class UsageError(PercozError):
    """Invalid experiment specification. `fields` lists every violated field."""

    def __init__(self, fields: Iterable[str]):
        self.fields: List[str] = list(fields)
        super().__init__("; ".join(self.fields) or "invalid experiment specification")
