"""Exception hierarchy for the skewdim package.

Computational failures (orbit did not escape, Newton stalled, continuation
left the hyperbolic regime, ...) are distinct exception types so callers can
react per failure mode.  ``code`` is a stable machine-readable identifier
used by the CLI when serializing errors.
"""

from __future__ import annotations


class SkewdimError(Exception):
    """Base class for all package errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class CriticalPoint(SkewdimError):
    """Vertical derivative vanished; the geometric potential is undefined."""


class SlowEscape(SkewdimError):
    """Orbit neither escaped nor was certified bounded within max_iters."""


class NotInBasin(SkewdimError):
    """Point has zero escape rate; outside the basin of infinity."""


class BranchAmbiguity(SkewdimError):
    """A factor in the coordinate product left the principal-root half plane."""


class NewtonDivergence(SkewdimError):
    """Newton inversion failed to converge within the iteration cap."""


class OnCircle(SkewdimError):
    """Evaluation requested on or below the unit circle where the series diverges."""


class BudgetExceeded(SkewdimError):
    """Periodic-point lattice would exceed the configured size budget."""


class NonHyperbolicContinuation(SkewdimError):
    """Continuation lost a repelling point (parameter left the safe regime)."""


class RootFindingFailure(SkewdimError):
    """Simultaneous root iteration stalled on an ill-conditioned cluster."""


class NoBracket(SkewdimError):
    """Pressure did not change sign on [0, 2]; no dimension zero to solve for."""


class DegenerateGrid(SkewdimError):
    """Parameter grid has too few distinct moduli for a quadratic fit."""


class ParseError(SkewdimError):
    """Configuration text is not syntactically valid."""


class ValidationError(SkewdimError):
    """Configuration parsed but violates one or more constraints."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
