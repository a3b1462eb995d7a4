"""Exception hierarchy shared across the package.

Every error the CLI maps to an exit code lives here, so the mapping stays in
one place and library users can catch `QGraphError` as a single root.
"""

from __future__ import annotations


class QGraphError(Exception):
    """Root of all package-specific errors."""


class ShapeMismatch(QGraphError):
    """Operands live in incompatible ambient matrix spaces."""


class ToleranceMismatch(QGraphError):
    """Binary subspace operations require bitwise-identical tolerances."""


class NotUnitalAlgebra(QGraphError):
    """A bimodule closure was asked for over a non-unital acting space."""


class ValidationFailed(QGraphError):
    """An axiom check failed; the message names the axiom and the residual."""


class NotUnital(ValidationFailed):
    pass


class NotSelfAdjoint(ValidationFailed):
    pass


class NotAlgebra(ValidationFailed):
    """Not closed under products, or not equal to its bicommutant."""


class NotBimodule(ValidationFailed):
    """The commutant does not map the system into itself."""


class NotIrreducible(QGraphError):
    """Operation requires a multiplicity-free (irreducibly acting) system."""


class DecompositionFailed(QGraphError):
    """Block decomposition did not verify within tolerance after retries."""


class SizeMismatch(QGraphError):
    pass


class BudgetExceeded(QGraphError):
    """Exact computation refused: input larger than the contracted budget."""


class NotPullback(QGraphError):
    """Vertex map is not a pullback map."""


class NotStarHomomorphism(QGraphError):
    pass


class Degenerate(QGraphError):
    """Subspace does not act non-degenerately on both sides."""


class StructureMismatch(QGraphError):
    """Input lacks the amplified-factor structure the operation assumes."""


class FactorizationFailed(QGraphError):
    """Tensor factorization of a compressed block failed to verify."""


class ParseError(QGraphError):
    """Malformed or mistyped input file."""


class InternalCheckError(QGraphError):
    """Two routes that must agree disagreed beyond tolerance."""
