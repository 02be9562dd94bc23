"""Exception taxonomy shared across the package.

Every failure mode that callers are expected to catch gets its own class so
that the command-line driver can map errors onto exit codes without string
matching.
"""
from __future__ import annotations


class LagrangeForgeError(Exception):
    """Base class for all package errors."""


# --- expression layer -------------------------------------------------------

class ExpressionError(LagrangeForgeError, ValueError):
    """Problems constructing or manipulating expression trees."""


class ExprSyntaxError(ExpressionError):
    """Malformed expression text.  Carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    """Identifier outside the allowed variables and declared parameters."""

    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier '{name}'", offset)
        self.name = name


class SubstitutionError(ExpressionError):
    """Substitution would capture or replace an integration variable."""


class EvalDomainError(LagrangeForgeError):
    """Evaluation left the mathematical domain (log of non-positive, ...)."""


class NonDifferentiableError(EvalDomainError):
    """Derivative requested at a point where it does not exist (|u| at 0)."""


class QuadratureError(LagrangeForgeError):
    """Numeric integration failed."""


class QuadratureDepthError(QuadratureError):
    """Adaptive bisection hit the depth limit; carries the worst subinterval."""

    def __init__(self, lo: float, hi: float, err: float):
        super().__init__(
            f"quadrature depth limit exceeded on [{lo!r}, {hi!r}] "
            f"(local error estimate {err:.3e})"
        )
        self.worst_interval = (lo, hi)
        self.error_estimate = err


# --- Lagrangian layer --------------------------------------------------------

class DegenerateLagrangianError(LagrangeForgeError):
    """|d2L/dv2| fell below the regularity floor at a sampled point."""

    def __init__(self, point, l_vv: float):
        super().__init__(
            f"degenerate Lagrangian: |L_vv| = {abs(l_vv):.3e} at point {point}"
        )
        self.point = point
        self.l_vv = l_vv


class EmptyDomainError(LagrangeForgeError):
    """Domain box has no sample points left after exclusions."""


class BracketError(LagrangeForgeError):
    """Momentum inversion bracket does not straddle the target."""


class NonMonotoneError(LagrangeForgeError):
    """Momentum is not monotone on the bracket (L_vv changes sign)."""


class NotInvariantError(LagrangeForgeError):
    """Quantity fails to be conserved along the probe trajectory."""

    def __init__(self, message: str, max_rate: float):
        super().__init__(f"{message} (max |d/dt| = {max_rate:.3e})")
        self.max_rate = max_rate


# --- constructors ------------------------------------------------------------

class BuilderError(LagrangeForgeError):
    """Base class for construction failures."""


class InadmissibleCoefficientsError(BuilderError):
    """Coefficient functions violate the family's admissibility condition."""

    def __init__(self, message: str, residual: float | None = None):
        if residual is not None:
            message = f"{message} (max residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class BadExponentError(BuilderError):
    """Exponent lies in the family's excluded set."""


class ZeroCrossingError(BuilderError):
    """An auxiliary function vanishes inside the working interval."""

    def __init__(self, message: str, location: float | None = None):
        if location is not None:
            message = f"{message} (near {location!r})"
        super().__init__(message)
        self.location = location


class ConstructionVerificationError(BuilderError):
    """Mandatory post-construction residual check failed."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


# --- dynamics ----------------------------------------------------------------

class IntegrationError(LagrangeForgeError):
    """Trajectory integration failed."""


class OverflowGuardError(IntegrationError):
    """State magnitude exceeded the overflow guard."""

    def __init__(self, t: float, value: float):
        super().__init__(f"state overflow at t = {t!r} (|state| = {value:.3e})")
        self.t = t


class StepUnderflowError(IntegrationError):
    """Adaptive step size collapsed below the resolvable limit."""

    def __init__(self, t: float):
        super().__init__(f"step size underflow at t = {t!r}")
        self.t = t


# --- command line ------------------------------------------------------------

class SpecValidationError(LagrangeForgeError):
    """Problem specification failed schema or semantic validation."""


class InapplicableFamilyError(LagrangeForgeError):
    """Requested construction family does not apply to the given equation."""
