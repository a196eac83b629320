"""Project Exceptions."""
from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from typing_extensions import Self


class IteLabError(Exception):
    """Project Base Exception."""


class ValidationError(IteLabError):
    """Input violates a documented precondition."""


class DomainViolationError(ValidationError):
    """Point lies outside the closure of the domain."""


class EllipticityError(ValidationError):
    """Coefficient field breaks symmetry or the declared ellipticity bound."""


class InvalidDiffeomorphismError(ValidationError):
    """Jacobian determinant is not positive or the boundary is not fixed."""


class SupportViolationError(ValidationError):
    """Divergence load does not vanish on the boundary band."""


class MeshQualityError(ValidationError):
    """Mesh fails the minimum angle gate."""


class DegenerateMediaError(ValidationError):
    """Disk media with equal contrast products."""


class ConfigError(ValidationError):
    """Config text cannot be parsed."""

    def __init__(self: Self, msg: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(msg if line is None else f"line {line}: {msg}")


class NumericalError(IteLabError):
    """Numerical procedure did not deliver a trustworthy result."""


class SingularSystemError(NumericalError):
    """Factorization hit a negligible pivot."""

    def __init__(self: Self, msg: str, pivot: float = 0.0) -> None:
        self.pivot = pivot
        super().__init__(msg)


class AccuracyError(NumericalError):
    """Residual above tolerance after iterative refinement."""

    def __init__(self: Self, msg: str, residual: float) -> None:
        self.residual = residual
        super().__init__(msg)


class NonConvergenceError(NumericalError):
    """Iteration diverged or stalled."""

    def __init__(self: Self, msg: str, history: list[float] | None = None) -> None:
        self.history = history or []
        super().__init__(msg)


class InversionError(NumericalError):
    """Newton inversion of a diffeomorphism failed."""


class DegenerateDenominatorError(NumericalError):
    """Half-space mode matching denominator vanishes."""

    def __init__(self: Self, msg: str, condition: str) -> None:
        self.condition = condition
        super().__init__(msg)


class GridTooCoarseError(NumericalError):
    """Root count changed when the scan step was halved."""
