"""Error taxonomy shared across the package.

ValidationError covers malformed inputs and configs (CLI exit code 2);
everything else raised by the package is a runtime failure (exit code 1).
"""


class PvkexError(Exception):
    """Base class for package errors."""


class ValidationError(PvkexError):
    """Input or configuration rejected before any work was done."""


class MalformedCodewordError(ValidationError):
    """Codeword violating the constant-weight codec invariants."""


class InfeasibleParametersError(PvkexError):
    """Parameter combination outside a bound's feasible region."""


class CoverageError(PvkexError):
    """Lookup outside the region a data table supports."""
