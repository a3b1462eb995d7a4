"""Operator systems, C*-algebras, commutants, multipliers, block decompositions.

All algebras here are concrete unital *-subalgebras of a matrix algebra M_n,
always finite dimensional, so the bicommutant is an honest closure operator
and every algebra decomposes as a direct sum of amplified matrix factors
under a unitary change of basis.  That decomposition (and the multiplier
algebra feeding it) is what the quantum skeleton machinery consumes.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DecompositionFailed,
    NotAlgebra,
    NotBimodule,
    NotIrreducible,
    NotSelfAdjoint,
    NotUnital,
    ShapeMismatch,
    ToleranceMismatch,
)
from .linalg import (
    MatSubspace,
    Tolerance,
    _numerical_rank,
    adjoint_space,
    bimodule_closure,
    contains,
    equals,
    intersect_space,
    orth_complement,
    orthonormalize,
    product_span,
    subspace_defect,
)

__all__ = [
    "BlockDecomposition",
    "IrreducibilityVerdict",
    "OperatorSystem",
    "QuantumGraph",
    "block_decomposition",
    "center",
    "commutant",
    "full_matrix_algebra",
    "generated_cstar",
    "irreducibility_test",
    "is_connected",
    "multiplier_algebra",
    "tensor_system",
    "validate_operator_system",
    "validate_quantum_graph",
    "verify_clique_set",
    "verify_independent_set",
]


def _eye(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.complex128)


def _require_square(space: MatSubspace) -> int:
    if not space.is_square:
        raise ShapeMismatch(f"need a square ambient, got {space.shape}")
    return space.dim_h


def full_matrix_algebra(n: int, tol: Tolerance | None = None) -> MatSubspace:
    tol = tol if tol is not None else Tolerance()
    basis = []
    for i in range(n):
        for j in range(n):
            m = np.zeros((n, n), dtype=np.complex128)
            m[i, j] = 1.0
            basis.append(m)
    return MatSubspace(n, n, basis, tol)


@dataclass(frozen=True)
class OperatorSystem:
    """A validated operator system: unital, self-adjoint subspace of M_n."""

    space: MatSubspace

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def ambient(self) -> int:
        return self.space.dim_h


@dataclass(frozen=True)
class QuantumGraph:
    """An operator system S together with the algebra A it is a quantum graph on.

    Validation guarantees A is a unital *-algebra equal to its bicommutant
    and that S is a bimodule over the commutant A'.
    """

    system: OperatorSystem
    algebra: MatSubspace
    algebra_commutant: MatSubspace

    @property
    def space(self) -> MatSubspace:
        return self.system.space

    @property
    def ambient(self) -> int:
        return self.system.ambient


def validate_operator_system(space: MatSubspace) -> OperatorSystem:
    """Check I in S and S* = S; raise NotUnital/NotSelfAdjoint with the residual."""
    n = _require_square(space)
    ok, res = contains(space, _eye(n))
    if not ok:
        raise NotUnital(f"identity not in the space (residual {res:.3e})")
    adj_defect = max(subspace_defect(adjoint_space(space), space),
                     subspace_defect(space, adjoint_space(space)))
    if adj_defect > space.tol.member_eps:
        raise NotSelfAdjoint(f"space differs from its adjoint (defect {adj_defect:.3e})")
    return OperatorSystem(space)


def _validate_algebra(a: MatSubspace) -> None:
    n = _require_square(a)
    ok, res = contains(a, _eye(n))
    if not ok:
        raise NotUnital(f"algebra lacks the identity (residual {res:.3e})")
    adj_defect = subspace_defect(adjoint_space(a), a)
    if adj_defect > a.tol.member_eps:
        raise NotSelfAdjoint(f"algebra not *-closed (defect {adj_defect:.3e})")
    prod_defect = subspace_defect(product_span(a, a), a)
    if prod_defect > a.tol.member_eps:
        raise NotAlgebra(f"not closed under products (defect {prod_defect:.3e})")
    bicomm = commutant(commutant(a))
    if not equals(bicomm, a):
        raise NotAlgebra(
            f"not equal to its bicommutant (dims {a.dim} vs {bicomm.dim})"
        )


def validate_quantum_graph(system_space: MatSubspace, algebra: MatSubspace) -> QuantumGraph:
    """Validate the pair (S, A): operator system, von Neumann algebra, A'-bimodule."""
    if system_space.shape != algebra.shape:
        raise ShapeMismatch(
            f"system {system_space.shape} and algebra {algebra.shape} must share an ambient"
        )
    system = validate_operator_system(system_space)
    _validate_algebra(algebra)
    comm = commutant(algebra)
    closed = bimodule_closure(system_space, comm, comm)
    defect = subspace_defect(closed, system_space)
    if closed.dim != system_space.dim or defect > system_space.tol.member_eps:
        raise NotBimodule(
            f"commutant bimodule closure grows the system (defect {defect:.3e})"
        )
    return QuantumGraph(system, algebra, comm)


def commutant(a: MatSubspace) -> MatSubspace:
    """All matrices commuting with every element: kernel of the stacked commutator map.

    Row-major convention: vec(x b) = (I ⊗ b^T) vec(x), vec(b x) = (b ⊗ I) vec(x).
    """
    n = _require_square(a)
    if a.dim == 0:
        return full_matrix_algebra(n, a.tol)
    eye = _eye(n)
    rows = [np.kron(eye, b.T) - np.kron(b, eye) for b in a.basis]
    big = np.vstack(rows)
    _, s, vh = np.linalg.svd(big, full_matrices=False)
    rank = _numerical_rank(s, a.tol)
    # Right nullspace vectors are the conjugated rows of vh (columns of V).
    basis = [vh[i].conj().reshape(n, n) for i in range(rank, vh.shape[0])]
    return MatSubspace(n, n, basis, a.tol)


def generated_cstar(space: MatSubspace) -> MatSubspace:
    """Smallest unital *-closed algebra containing the space.

    Symmetrizes the input (adds adjoints and the identity), then alternates
    pairwise products with the running span until the dimension stabilizes.
    """
    n = _require_square(space)
    seed = list(space.basis) + [x.conj().T for x in space.basis] + [_eye(n)]
    current = orthonormalize(seed, space.tol, shape=space.shape)
    while True:
        prods = [x @ y for x in current.basis for y in current.basis]
        new = orthonormalize(list(current.basis) + prods, space.tol, shape=space.shape)
        if new.dim == current.dim:
            return new
        current = new


def center(a: MatSubspace) -> MatSubspace:
    return intersect_space(a, commutant(a))


class IrreducibilityVerdict(enum.Enum):
    MULTIPLICITY_FREE = "MultiplicityFree"
    NOT_MULTIPLICITY_FREE = "NotMultiplicityFree"


def irreducibility_test(system: OperatorSystem | MatSubspace) -> IrreducibilityVerdict:
    """Multiplicity-free proxy for irreducible action: commutant of C*(S) abelian.

    Equivalent to every multiplicity in the block decomposition of C*(S)
    being 1.  This is the verdict the multiplier/skeleton pipeline gates on;
    it is a proxy, not the complete-order notion itself.
    """
    space = system.space if isinstance(system, OperatorSystem) else system
    comm = commutant(generated_cstar(space))
    worst = 0.0
    for x, y in itertools.combinations(comm.basis, 2):
        worst = max(worst, float(np.linalg.norm(x @ y - y @ x)))
    if worst > space.tol.member_eps:
        return IrreducibilityVerdict.NOT_MULTIPLICITY_FREE
    return IrreducibilityVerdict.MULTIPLICITY_FREE


def multiplier_algebra(system: OperatorSystem) -> MatSubspace:
    """{a in C*(S) : aS ⊆ S and a*S ⊆ S}, for multiplicity-free systems.

    Computed as the complex-linear nullspace V = {a in C*(S): aS ⊆ S}
    intersected with its adjoint image, which is the conjugate-linear half of
    the condition.  The concrete identification inside C*(S) is only
    justified for irreducibly acting systems, hence the gate.
    """
    if irreducibility_test(system) is not IrreducibilityVerdict.MULTIPLICITY_FREE:
        raise NotIrreducible("multiplier algebra requires a multiplicity-free system")
    space = system.space
    n = space.dim_h
    cs = generated_cstar(space)
    # Constraint matrix: columns indexed by the C*(S) basis, rows by
    # vec((1 - P_S)(c_p s_q)) over all system basis elements s_q.
    cols = []
    for c in cs.basis:
        rows = []
        for s in space.basis:
            prod = c @ s
            rows.append((prod - space.project(prod)).reshape(-1))
        cols.append(np.concatenate(rows))
    constraint = np.stack(cols, axis=1)
    # Tall matrix (|S| n^2 rows >= dim C*(S) columns), so the economy vh
    # already holds every right singular vector.
    _, s_vals, vh = np.linalg.svd(constraint, full_matrices=False)
    rank = _numerical_rank(s_vals, space.tol)
    coeffs = vh[rank:].conj()  # right singular vectors spanning the nullspace
    mats = [sum(w * c for w, c in zip(vec, cs.basis)) for vec in coeffs]
    left_invariant = orthonormalize(mats, space.tol, shape=space.shape)
    return intersect_space(left_invariant, adjoint_space(left_invariant))


@dataclass(frozen=True)
class BlockDecomposition:
    """A unitary W and sizes (alpha_i, n_i) with W A W* = ⊕ M_{alpha_i} ⊗ I_{n_i}.

    Blocks are listed in canonical order (sorted by (n_i, alpha_i), ties broken
    by a seeded spectral fingerprint); `residual` is the verified subspace
    defect between W A W* and the block model.
    """

    unitary: np.ndarray
    blocks: tuple[tuple[int, int], ...]
    residual: float = 0.0

    @property
    def total_dim(self) -> int:
        return int(sum(a * m for a, m in self.blocks))

    @property
    def offsets(self) -> tuple[int, ...]:
        out = [0]
        for a, m in self.blocks:
            out.append(out[-1] + a * m)
        return tuple(out)

    @property
    def alphas(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.blocks)

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(m for _, m in self.blocks)


def _cluster_sorted(vals: np.ndarray, gap: float) -> list[np.ndarray]:
    """Split sorted values into clusters at gaps larger than `gap`; returns index groups."""
    groups = []
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[i - 1] > gap:
            groups.append(np.arange(start, i))
            start = i
    return groups


def _random_selfadjoint_in(space: MatSubspace, rng: np.random.Generator) -> np.ndarray:
    coeffs = rng.standard_normal(space.dim)
    z = sum(c * b for c, b in zip(coeffs, space.basis))
    return (z + z.conj().T) / 2.0


def _random_element_in(space: MatSubspace, rng: np.random.Generator) -> np.ndarray:
    coeffs = rng.standard_normal(space.dim) + 1j * rng.standard_normal(space.dim)
    return sum(c * b for c, b in zip(coeffs, space.basis))


def _phase_fix_columns(v: np.ndarray) -> np.ndarray:
    out = v.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        k = int(np.argmax(np.abs(col)))
        ph = col[k] / abs(col[k]) if abs(col[k]) > 0 else 1.0
        out[:, j] = col / ph
    return out


class _RetryDraw(Exception):
    pass


_CLUSTER_GAP = 1e-6
_MAX_RETRIES = 5


def block_decomposition(a: MatSubspace, seed: int = 0) -> BlockDecomposition:
    """Decompose a finite-dimensional von Neumann algebra into amplified factors.

    Strategy: spectral projections of a generic self-adjoint central element
    give the minimal central projections; inside each block, a generic
    self-adjoint element has eigenspaces of common dimension n_i, and matrix
    units built from its spectral projections plus polar decompositions of
    cross terms assemble the change-of-basis unitary.  Generic draws separate
    eigenvalues with probability one; degenerate draws are retried.
    """
    n = _require_square(a)
    _validate_algebra(a)
    rng = np.random.default_rng(seed)
    # Drawn before the retry loop so retries do not shift it: the tie-break
    # fingerprint element used for canonical block order.
    fingerprint_elt = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    fingerprint_elt = (fingerprint_elt + fingerprint_elt.conj().T) / 2.0

    z_space = center(a)
    k = z_space.dim

    last_err: Exception | None = None
    for _ in range(_MAX_RETRIES):
        try:
            blocks = _attempt_decomposition(a, z_space, k, rng, fingerprint_elt)
            break
        except _RetryDraw as exc:
            last_err = exc
    else:
        raise DecompositionFailed(f"no generic draw separated the blocks: {last_err}")

    order = sorted(range(len(blocks)), key=lambda i: (blocks[i][1], blocks[i][0], blocks[i][2]))
    w_rows = [blocks[i][3] for i in order]
    w = np.vstack(w_rows)
    sizes = tuple((blocks[i][0], blocks[i][1]) for i in order)

    unit_defect = float(np.linalg.norm(w @ w.conj().T - _eye(n)))
    if unit_defect > a.tol.member_eps:
        raise DecompositionFailed(f"assembled W not unitary (defect {unit_defect:.3e})")
    model = _block_model_space(sizes, a.tol)
    rotated = orthonormalize([w @ x @ w.conj().T for x in a.basis], a.tol, shape=a.shape)
    residual = max(subspace_defect(rotated, model), subspace_defect(model, rotated))
    if rotated.dim != model.dim or residual > a.tol.member_eps:
        raise DecompositionFailed(f"rotated algebra misses the block model (defect {residual:.3e})")
    return BlockDecomposition(unitary=w, blocks=sizes, residual=residual)


def _block_model_space(sizes, tol: Tolerance) -> MatSubspace:
    """The literal subspace ⊕ M_{alpha_i} ⊗ I_{n_i} in block layout."""
    n = sum(al * m for al, m in sizes)
    mats = []
    off = 0
    for al, m in sizes:
        for r in range(al):
            for s in range(al):
                mat = np.zeros((n, n), dtype=np.complex128)
                for t in range(m):
                    mat[off + r * m + t, off + s * m + t] = 1.0
                mats.append(mat)
        off += al * m
    return orthonormalize(mats, tol, shape=(n, n))


def _attempt_decomposition(a, z_space, k, rng, fingerprint_elt):
    n = a.dim_h
    z = _random_selfadjoint_in(z_space, rng)
    evals, evecs = np.linalg.eigh(z)
    clusters = _cluster_sorted(evals, _CLUSTER_GAP)
    if len(clusters) != k:
        raise _RetryDraw(f"central element produced {len(clusters)} clusters, expected {k}")

    blocks = []
    for idx in clusters:
        q = evecs[:, idx]  # orthonormal basis of the block's carrier space
        d = q.shape[1]
        compressed = orthonormalize(
            [q.conj().T @ x @ q for x in a.basis], a.tol, shape=(d, d)
        )
        av = _random_selfadjoint_in(compressed, rng)
        sub_evals, sub_evecs = np.linalg.eigh(av)
        sub_clusters = _cluster_sorted(sub_evals, _CLUSTER_GAP)
        alpha = len(sub_clusters)
        mult_sizes = {len(c) for c in sub_clusters}
        if len(mult_sizes) != 1 or d % alpha != 0:
            raise _RetryDraw("block element eigenvalues did not split evenly")
        m = d // alpha
        if mult_sizes != {m} or compressed.dim != alpha * alpha:
            raise _RetryDraw(
                f"block is not a factor of the expected shape (dim {compressed.dim}, alpha {alpha})"
            )
        spectral = [sub_evecs[:, c] @ sub_evecs[:, c].conj().T for c in sub_clusters]

        # Matrix units e_{r1}: polar parts of E_r g E_1 for a generic g in the block.
        g = _random_element_in(compressed, rng)
        e_r1 = [spectral[0]]
        for r in range(1, alpha):
            y = spectral[r] @ g @ spectral[0]
            uu, sv, vv = np.linalg.svd(y)
            if sv.size < m or sv[m - 1] <= 1e-10 * max(sv[0], 1.0):
                raise _RetryDraw("cross term rank-deficient")
            e_r1.append(uu[:, :m] @ vv[:m, :])

        # Orthonormal basis of the range of e_11, propagated by the e_{r1}.
        vals1, vecs1 = np.linalg.eigh(spectral[0])
        f_cols = _phase_fix_columns(vecs1[:, vals1 > 0.5])
        if f_cols.shape[1] != m:
            raise _RetryDraw("spectral projection rank drifted")
        cols = [e_r1[r] @ f_cols[:, t] for r in range(alpha) for t in range(m)]
        w_block = (q @ np.stack(cols, axis=1)).conj().T  # rows: coordinates on H

        comp_fp = q.conj().T @ fingerprint_elt @ q
        fingerprint = tuple(np.round(np.linalg.eigvalsh(comp_fp), 6).tolist())
        blocks.append((alpha, m, fingerprint, w_block))
    return blocks


def tensor_system(a: MatSubspace, b: MatSubspace) -> MatSubspace:
    """Span of Kronecker products {x ⊗ y}, row-major convention."""
    _require_square(a)
    _require_square(b)
    if a.tol != b.tol:
        raise ToleranceMismatch(f"tolerances differ: {a.tol} vs {b.tol}")
    n = a.dim_h * b.dim_h
    prods = [np.kron(x, y) for x in a.basis for y in b.basis]
    return orthonormalize(prods, a.tol, shape=(n, n))


@dataclass(frozen=True)
class VectorSetReport:
    ok: bool
    failing_pairs: tuple[tuple[int, int, float], ...] = ()
    orthonormality_defect: float = 0.0


def _check_vectors(space: MatSubspace, vectors) -> list[np.ndarray]:
    n = space.dim_h
    out = []
    for v in vectors:
        v = np.asarray(v, dtype=np.complex128).reshape(-1)
        if v.shape != (n,):
            raise ShapeMismatch(f"vector of length {v.shape[0]} in ambient dimension {n}")
        out.append(v)
    return out


def verify_independent_set(space: MatSubspace, vectors) -> tuple[bool, VectorSetReport]:
    """Check orthonormality and xi_i xi_j* ⊥ S for i != j."""
    vecs = _check_vectors(space, vectors)
    gram = np.array([[np.vdot(u, v) for v in vecs] for u in vecs])
    ortho = float(np.max(np.abs(gram - np.eye(len(vecs))))) if vecs else 0.0
    perp = orth_complement(space)
    failing = []
    for i, j in itertools.permutations(range(len(vecs)), 2):
        rank_one = np.outer(vecs[i], vecs[j].conj())
        ok, res = contains(perp, rank_one)
        if not ok:
            failing.append((i, j, res))
    ok = ortho <= space.tol.member_eps and not failing
    return ok, VectorSetReport(ok, tuple(failing), ortho)


def verify_clique_set(space: MatSubspace, vectors) -> tuple[bool, VectorSetReport]:
    """Check orthonormality and xi_i xi_j* in S for all pairs."""
    vecs = _check_vectors(space, vectors)
    gram = np.array([[np.vdot(u, v) for v in vecs] for u in vecs])
    ortho = float(np.max(np.abs(gram - np.eye(len(vecs))))) if vecs else 0.0
    failing = []
    for i, j in itertools.product(range(len(vecs)), repeat=2):
        rank_one = np.outer(vecs[i], vecs[j].conj())
        ok, res = contains(space, rank_one)
        if not ok:
            failing.append((i, j, res))
    ok = ortho <= space.tol.member_eps and not failing
    return ok, VectorSetReport(ok, tuple(failing), ortho)


def is_connected(system: OperatorSystem) -> bool:
    """C*(S) is the full matrix algebra of the ambient space."""
    space = system.space
    return generated_cstar(space).dim == space.ambient_dim
