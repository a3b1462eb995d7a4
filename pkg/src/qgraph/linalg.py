"""Subspace arithmetic for spaces of rectangular complex matrices.

Everything upstream (operator systems, bimodules, ternary rings of operators,
Kraus spaces) reduces to a few primitives on subspaces of B(H, K): an
orthonormal basis under the Hilbert-Schmidt inner product <x, y> = Tr(x* y),
membership by projection residual, and closed spans of products.  Numerical
rank is always decided from singular values relative to the largest one, so
every verdict in the package traces back to the two thresholds in `Tolerance`.

Matrices are dense complex numpy arrays of shape (dim_k, dim_h), i.e. maps
from a dim_h-dimensional space into a dim_k-dimensional one.  Flattening is
row-major throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NotUnitalAlgebra, ShapeMismatch, ToleranceMismatch

__all__ = [
    "DEFAULT_MEMBER_EPS",
    "DEFAULT_RANK_EPS",
    "MatSubspace",
    "Tolerance",
    "adjoint_space",
    "bimodule_closure",
    "contains",
    "equals",
    "hs_inner",
    "intersect_space",
    "orth_complement",
    "orthonormalize",
    "product_span",
    "subspace_defect",
    "sum_space",
]

DEFAULT_RANK_EPS = 1e-9
DEFAULT_MEMBER_EPS = 1e-8


@dataclass(frozen=True)
class Tolerance:
    """Numerical thresholds carried by every subspace.

    rank_eps decides numerical rank: singular values at or below
    rank_eps * sigma_max count as zero.  member_eps bounds the relative
    projection residual accepted by membership tests.  Binary operations
    demand bitwise-equal tolerances on both operands so thresholds cannot
    drift silently through a computation.
    """

    rank_eps: float = DEFAULT_RANK_EPS
    member_eps: float = DEFAULT_MEMBER_EPS

    def __post_init__(self) -> None:
        if not 0.0 < self.rank_eps < 1.0:
            raise ValueError(f"rank_eps must lie in (0, 1), got {self.rank_eps!r}")
        if not 0.0 < self.member_eps < 1.0:
            raise ValueError(f"member_eps must lie in (0, 1), got {self.member_eps!r}")


def hs_inner(x: np.ndarray, y: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product Tr(x* y), conjugate-linear in x."""
    return complex(np.vdot(x, y))


def _as_matrix(x, shape: tuple[int, int]) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != shape:
        raise ShapeMismatch(f"expected shape {shape}, got {x.shape}")
    return x


class MatSubspace:
    """A subspace of dim_k x dim_h complex matrices with an orthonormal basis.

    Instances are immutable: basis arrays are write-protected.  The zero
    subspace is represented by an empty basis.  Use `orthonormalize` to build
    one from an arbitrary spanning list; the constructor insists the basis it
    is handed is already orthonormal (within member_eps).
    """

    __slots__ = ("dim_h", "dim_k", "basis", "tol")

    def __init__(
        self,
        dim_h: int,
        dim_k: int,
        basis: Sequence[np.ndarray],
        tol: Tolerance | None = None,
    ) -> None:
        tol = tol if tol is not None else Tolerance()
        if dim_h < 1 or dim_k < 1:
            raise ValueError("ambient dimensions must be positive")
        mats = []
        for b in basis:
            b = np.ascontiguousarray(b, dtype=np.complex128)
            if b.shape != (dim_k, dim_h):
                raise ShapeMismatch(
                    f"basis element of shape {b.shape} in ambient {(dim_k, dim_h)}"
                )
            if not np.all(np.isfinite(b)):
                raise ValueError("basis entries must be finite")
            b.flags.writeable = False
            mats.append(b)
        if len(mats) > dim_h * dim_k:
            raise ValueError("basis has more elements than the ambient dimension")
        if mats:
            stack = np.stack([m.reshape(-1) for m in mats])
            gram = stack @ stack.conj().T
            err = float(np.max(np.abs(gram - np.eye(len(mats)))))
            if err > tol.member_eps:
                raise ValueError(f"basis not orthonormal (Gram defect {err:.3e})")
        self.dim_h = int(dim_h)
        self.dim_k = int(dim_k)
        self.basis = tuple(mats)
        self.tol = tol

    # -- structure ---------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def shape(self) -> tuple[int, int]:
        """Shape (dim_k, dim_h) of every member matrix."""
        return (self.dim_k, self.dim_h)

    @property
    def ambient_dim(self) -> int:
        return self.dim_h * self.dim_k

    @property
    def is_square(self) -> bool:
        return self.dim_h == self.dim_k

    def __repr__(self) -> str:
        return f"MatSubspace(dim={self.dim}, shape={self.dim_k}x{self.dim_h})"

    # -- projection --------------------------------------------------------

    def project(self, x) -> np.ndarray:
        """Hilbert-Schmidt orthogonal projection of x onto the subspace."""
        x = _as_matrix(x, self.shape)
        out = np.zeros(self.shape, dtype=np.complex128)
        for b in self.basis:
            out += np.vdot(b, x) * b
        return out

    def coefficients(self, x) -> np.ndarray:
        """Basis coefficients <b_i, x>; does not check membership."""
        x = _as_matrix(x, self.shape)
        return np.array([np.vdot(b, x) for b in self.basis])


def _require_same_space(a: MatSubspace, b: MatSubspace) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"ambient shapes differ: {a.shape} vs {b.shape}")
    _require_same_tol(a, b)


def _require_same_tol(a: MatSubspace, b: MatSubspace) -> None:
    if a.tol != b.tol:
        raise ToleranceMismatch(f"tolerances differ: {a.tol} vs {b.tol}")


def orthonormalize(
    mats: Iterable[np.ndarray],
    tol: Tolerance | None = None,
    *,
    shape: tuple[int, int] | None = None,
) -> MatSubspace:
    """Orthonormal basis of the span of `mats` via SVD of the flattened stack.

    `shape` is (dim_k, dim_h); it is required when `mats` is empty (the zero
    subspace has no element to infer it from) and checked against every
    element otherwise.  Singular values at or below rank_eps * sigma_max are
    discarded, which is the package-wide numerical rank decision.
    """
    tol = tol if tol is not None else Tolerance()
    mats = [np.asarray(m, dtype=np.complex128) for m in mats]
    if shape is None:
        if not mats:
            raise ValueError("empty spanning list needs an explicit ambient shape")
        shape = mats[0].shape
        if len(shape) != 2:
            raise ShapeMismatch(f"expected a matrix, got array of shape {shape}")
    dim_k, dim_h = shape
    for m in mats:
        if m.shape != (dim_k, dim_h):
            raise ShapeMismatch(f"spanning matrices disagree: {m.shape} vs {(dim_k, dim_h)}")
        if not np.all(np.isfinite(m)):
            raise ValueError("spanning matrices must be finite")
    if not mats:
        return MatSubspace(dim_h, dim_k, (), tol)
    stack = np.stack([m.reshape(-1) for m in mats])
    _, s, vh = np.linalg.svd(stack, full_matrices=False)
    rank = _numerical_rank(s, tol)
    basis = [vh[i].reshape(dim_k, dim_h) for i in range(rank)]
    return MatSubspace(dim_h, dim_k, basis, tol)


def _numerical_rank(s: np.ndarray, tol: Tolerance) -> int:
    # Relative with an absolute floor: every stack in this package is built
    # from orthonormal matrices and their products, so genuine data has
    # sigma_max of order one.  Without the floor, a stack of pure roundoff
    # (e.g. the commutator map of a central element) has a tiny but nonzero
    # sigma_max and the relative rule would promote noise to full rank.
    if s.size == 0:
        return 0
    return int(np.sum(s > tol.rank_eps * max(float(s[0]), 1.0)))


def contains(space: MatSubspace, x) -> tuple[bool, float]:
    """Membership test: (x in space, relative projection residual).

    residual = ||x - P(x)|| / max(1, ||x||); membership means
    residual <= member_eps.
    """
    x = _as_matrix(x, space.shape)
    r = x - space.project(x)
    residual = float(np.linalg.norm(r) / max(1.0, np.linalg.norm(x)))
    return residual <= space.tol.member_eps, residual


def subspace_defect(a: MatSubspace, b: MatSubspace) -> float:
    """Largest membership residual of a basis element of `a` relative to `b`.

    Zero iff a ⊆ b (up to member_eps); the symmetrized max over both orders
    is the natural distance behind `equals`.
    """
    _require_same_space(a, b)
    worst = 0.0
    for x in a.basis:
        _, r = contains(b, x)
        worst = max(worst, r)
    return worst


def equals(a: MatSubspace, b: MatSubspace) -> bool:
    """Mutual containment of the two bases within member_eps."""
    _require_same_space(a, b)
    if a.dim != b.dim:
        return False
    return (
        subspace_defect(a, b) <= a.tol.member_eps
        and subspace_defect(b, a) <= a.tol.member_eps
    )


def product_span(a: MatSubspace, b: MatSubspace) -> MatSubspace:
    """Closed span of {x y : x in a, y in b}."""
    _require_same_tol(a, b)
    if a.dim_h != b.dim_k:
        raise ShapeMismatch(
            f"cannot multiply {a.dim_k}x{a.dim_h} by {b.dim_k}x{b.dim_h} spaces"
        )
    prods = [x @ y for x in a.basis for y in b.basis]
    return orthonormalize(prods, a.tol, shape=(a.dim_k, b.dim_h))


def adjoint_space(a: MatSubspace) -> MatSubspace:
    """The subspace {x* : x in a}; adjoints of an orthonormal basis stay orthonormal."""
    return MatSubspace(a.dim_k, a.dim_h, [x.conj().T for x in a.basis], a.tol)


def sum_space(a: MatSubspace, b: MatSubspace) -> MatSubspace:
    _require_same_space(a, b)
    return orthonormalize(list(a.basis) + list(b.basis), a.tol, shape=a.shape)


def orth_complement(a: MatSubspace) -> MatSubspace:
    """Hilbert-Schmidt orthogonal complement within the ambient matrix space."""
    n = a.ambient_dim
    if a.dim == 0:
        basis = [row.reshape(a.dim_k, a.dim_h) for row in np.eye(n, dtype=np.complex128)]
        return MatSubspace(a.dim_h, a.dim_k, basis, a.tol)
    stack = np.stack([m.reshape(-1) for m in a.basis])
    _, s, vh = np.linalg.svd(stack, full_matrices=True)
    rank = _numerical_rank(s, a.tol)
    basis = [vh[i].reshape(a.dim_k, a.dim_h) for i in range(rank, n)]
    return MatSubspace(a.dim_h, a.dim_k, basis, a.tol)


def intersect_space(a: MatSubspace, b: MatSubspace) -> MatSubspace:
    """Intersection, computed as the complement of the sum of complements."""
    _require_same_space(a, b)
    return orth_complement(sum_space(orth_complement(a), orth_complement(b)))


def bimodule_closure(x: MatSubspace, left: MatSubspace, right: MatSubspace) -> MatSubspace:
    """Smallest subspace Y containing x with left·Y·right ⊆ Y.

    `left` must be a unital space acting on the codomain side of x, `right`
    one acting on the domain side (unitality is what the iteration needs to
    keep Y inside the closure while containing x).  Iterates
    Y <- span(Y ∪ LY ∪ YR ∪ LYR) until the dimension stabilizes; terminates
    because the dimension strictly increases and is bounded by the ambient.
    """
    _require_same_tol(x, left)
    _require_same_tol(x, right)
    if not left.is_square or left.dim_h != x.dim_k:
        raise ShapeMismatch(f"left space {left.shape} does not act on codomain of {x.shape}")
    if not right.is_square or right.dim_h != x.dim_h:
        raise ShapeMismatch(f"right space {right.shape} does not act on domain of {x.shape}")
    for name, alg in (("left", left), ("right", right)):
        ok, res = contains(alg, np.eye(alg.dim_h, dtype=np.complex128))
        if not ok:
            raise NotUnitalAlgebra(f"{name} acting space lacks the identity (residual {res:.3e})")

    current = x
    while True:
        mats = list(current.basis)
        ly = [a @ y for a in left.basis for y in current.basis]
        mats += ly
        mats += [y @ r for y in current.basis for r in right.basis]
        mats += [a @ r for a in ly for r in right.basis]
        new = orthonormalize(mats, x.tol, shape=x.shape)
        if new.dim == current.dim:
            return new
        current = new
