"""Exception hierarchy.

Verdicts (pass/fail) are never exceptions; these are raised only when a
computation cannot be carried out as requested.
"""


class ShiftgenError(Exception):
    """Base class for all package errors."""


class ConstructionError(ShiftgenError, ValueError):
    """An object was built from invalid data (non-finite values, bad shapes)."""


class ConfigurationError(ShiftgenError, ValueError):
    """A configuration or descriptor is inconsistent or unknown."""


class ContractError(ShiftgenError, ValueError):
    """A caller violated a documented precondition (e.g. site mismatch)."""


class NumericalError(ShiftgenError, ArithmeticError):
    """A numerical routine failed (e.g. Cholesky after jitter escalation)."""


class PositivityError(ShiftgenError, ArithmeticError):
    """A normalizing integral or origin norm that must be positive was zero."""


class DegenerateTiltingError(ShiftgenError, ArithmeticError):
    """All tilting weights in a resampling pool were zero."""
