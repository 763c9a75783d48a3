"""
ViscoFrac Errors
================

Exception hierarchy shared by every module. Value-type problems subclass
ValueError and numerical failures subclass RuntimeError, so callers written
against the builtins keep working.
"""

from typing import Optional


class ViscoFracError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(ViscoFracError, ValueError):
    """Invalid scenario or configuration input."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = []
        if key:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class GeometryError(ViscoFracError, ValueError):
    """Mesh or crack geometry violates its invariants."""


class DomainError(ViscoFracError, ValueError):
    """A time or index lies outside the admissible range."""


class ContractError(ViscoFracError, ValueError):
    """Argument sizes or states do not match the operation's contract."""


class MaterialError(ViscoFracError, ValueError):
    """Elasticity or viscosity tensor is asymmetric or not coercive."""


class DataError(ViscoFracError, ValueError):
    """Initial or boundary data are inconsistent."""


class SamplingError(ViscoFracError, ValueError):
    """Tabulated data cannot be sampled at the requested resolution."""


class PreconditionError(ViscoFracError, ValueError):
    """A diagnostic was requested outside its domain of validity."""


class NumericalError(ViscoFracError, RuntimeError):
    """Linear solve or factorization failure."""

    def __init__(self, message: str, conditioning: Optional[float] = None):
        self.conditioning = conditioning
        if conditioning is not None:
            message = f"{message} (conditioning estimate {conditioning:.3e})"
        super().__init__(message)


class InequalityViolation(ViscoFracError, RuntimeError):
    """An energy inequality failed beyond its tolerance."""


class OutputError(ViscoFracError, OSError):
    """An output artifact could not be written."""

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"cannot write {path}: {reason}")
