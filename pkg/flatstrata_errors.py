"""
Exception hierarchy for flatstrata.
Every error names the invariant it protects; the CLI maps the class to an exit code.
"""

from typing import Optional


class FlatStrataError(Exception):
    """Base class for all library errors."""

    exit_code = 2
    invariant = "unspecified"

    def __init__(self, message: str, invariant: Optional[str] = None):
        super().__init__(message)
        if invariant is not None:
            self.invariant = invariant

    def __str__(self) -> str:
        return f"{type(self).__name__}: {self.args[0]} [invariant: {self.invariant}]"


# ---------------------------------------------------------------------------
# Validation family (exit code 2)
# ---------------------------------------------------------------------------

class SurfaceValidationError(FlatStrataError):
    invariant = "valid surface"


class UnmatchedEdge(SurfaceValidationError):
    invariant = "gluing is an involution on (polygon, edge) pairs"


class NonTranslationGluing(SurfaceValidationError):
    invariant = "partner edge vector is the negated edge vector"


class SelfIntersectingPolygon(SurfaceValidationError):
    invariant = "polygons are simple with positive area"


class AngleNotMultipleOf2Pi(SurfaceValidationError):
    invariant = "cone angles are positive multiples of 2*pi"


class SignatureMismatch(SurfaceValidationError):
    invariant = "declared orders match cone angles and sum to 2g-2"


class ZeroScalar(SurfaceValidationError):
    invariant = "rescaling factor is nonzero"


class UnknownFamily(SurfaceValidationError):
    invariant = "builtin family exists"


class ParamOutOfRange(SurfaceValidationError):
    invariant = "family parameters lie in their admissible range"


class SizeMismatch(FlatStrataError):
    invariant = "signature length equals surjection domain size"


class InvalidSurjection(FlatStrataError):
    invariant = "surjection fixes the prefix and hits every codomain element"


class GenusTooSmall(FlatStrataError):
    invariant = "genus >= 2"


class ChainNotDecreasing(FlatStrataError):
    invariant = "surjection chain is strictly decreasing"


class ChainTooDeep(FlatStrataError):
    invariant = "chain length <= stratification depth 2g-3+eps_n"


class NotInCover(FlatStrataError):
    invariant = "surface lies in the cover set V_sigma"


class BoundaryNotMarked(FlatStrataError):
    invariant = "chain boundary supported on marked points"


class NotHermitian(FlatStrataError):
    invariant = "matrix is Hermitian"


class UnsupportedFormat(FlatStrataError):
    invariant = "output format is json or csv"


class ConfigError(FlatStrataError):
    invariant = "tolerances positive and node budget >= 10^4"


class UnknownCommand(FlatStrataError):
    invariant = "known subcommand"


class BadFlag(FlatStrataError):
    invariant = "well-formed command-line flags"


# ---------------------------------------------------------------------------
# Numerical family (exit code 3)
# ---------------------------------------------------------------------------

class NumericalError(FlatStrataError):
    exit_code = 3
    invariant = "numerical tolerance"


class BudgetExceeded(NumericalError):
    invariant = "enumeration stays within the node budget"


class RankDeficient(NumericalError):
    invariant = "segment pool spans the target rank"


class RankMismatch(NumericalError):
    invariant = "relative homology rank equals 2g+n+k-1"


class PolygonDegenerates(NumericalError):
    invariant = "deformed polygons stay simple with positive area"


class ClosureViolation(NumericalError):
    invariant = "deformed edge vectors close up around every polygon"


class DeformFailed(NumericalError):
    invariant = "finite-difference stencil points deform successfully"


class ZetaOutOfDomain(NumericalError):
    invariant = "zeta_sigma < c on U_sigma"
