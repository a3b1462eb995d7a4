"""True-twin reduction of quantum graphs and the equivalence decision pipeline.

The reduction works entirely through the multiplier algebra A_S: its block
decomposition splits the space into multiplicity layers, the system factors
over each pair of layers as a full matrix factor tensor a reduced block, and
the reduced blocks assemble into a smaller quantum graph (R, C) of which the
original is a full pullback.  Equivalence of two systems is then decided in
three tiers: conjugation-invariant fingerprints of the reduced data refute,
graph-shaped skeletons reduce to exact graph isomorphism, and everything else
goes to a budgeted search for a block unitary aligning the reduced systems.
A verdict of Equivalent is only ever emitted together with a witness that
re-verifies; a failed search yields Undecided, never NotEquivalent.
"""

from __future__ import annotations

import enum
import hashlib
import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from . import algebras, classical
from .algebras import (
    BlockDecomposition,
    QuantumGraph,
    block_decomposition,
    multiplier_algebra,
)
from .errors import FactorizationFailed, InternalCheckError, StructureMismatch
from .linalg import (
    MatSubspace,
    adjoint_space,
    equals,
    orthonormalize,
    product_span,
    subspace_defect,
)
from .morita import (
    Condition,
    ConditionReport,
    KrausMap,
    PullbackVerdict,
    TroSpace,
    is_pullback_homomorphism,
    kraus_space,
    validate_kraus,
    verify_tro_equivalence,
)

__all__ = [
    "SearchBudget",
    "SkeletonFingerprint",
    "SkeletonResult",
    "TroDecision",
    "TroVerdict",
    "decide_tro_equivalence",
    "quantum_skeleton",
    "skeleton_fingerprint",
    "slice_independence_check",
    "tro_between_amplified_factors",
]

# Permutation enumeration cap for canonical grids: product of factorials of
# the color-tie groups.  Beyond this the fingerprint keeps only the sorted
# color profile, which is coarser but still a sound refuter.
_CANONICAL_PERM_BUDGET = 10080


@dataclass(frozen=True)
class SkeletonResult:
    """The reduced quantum graph of a multiplicity-free system.

    reduced_system R and reduced_algebra C live on L = ⊕ ℂ^{n_i}; blocks is
    the decomposition of the multiplier algebra the reduction came from;
    slice_blocks[i][j] is the reduced block R_ij in M_{n_i, n_j}; and
    canonical_pullback is the amplification map theta: C -> A exhibiting the
    input as a full pullback of (R, C).
    """

    reduced_system: MatSubspace
    reduced_algebra: MatSubspace
    blocks: BlockDecomposition
    slice_blocks: tuple[tuple[MatSubspace, ...], ...]
    canonical_pullback: KrausMap

    @property
    def skeleton_dim(self) -> int:
        return int(sum(self.blocks.multiplicities))

    def reduced_quantum_graph(self) -> QuantumGraph:
        return algebras.validate_quantum_graph(self.reduced_system, self.reduced_algebra)


def _layer_offsets(ns: tuple[int, ...]) -> list[int]:
    out = [0]
    for n in ns:
        out.append(out[-1] + n)
    return out


def _matrix_unit(i: int, j: int, rows: int, cols: int) -> np.ndarray:
    e = np.zeros((rows, cols), dtype=np.complex128)
    e[i, j] = 1.0
    return e


def quantum_skeleton(sqg: QuantumGraph, seed: int = 0) -> SkeletonResult:
    """Reduce a multiplicity-free quantum graph to its skeleton (R, C).

    Each compressed block S_ij must factor as the full matrix space between
    the multiplicity layers tensor the slice R_ij; the factorization is
    verified and a residual beyond tolerance raises FactorizationFailed,
    pointing at numerical trouble or an input outside the contract.
    """
    tol = sqg.space.tol
    mult = multiplier_algebra(sqg.system)
    dec = block_decomposition(mult, seed=seed)
    w = dec.unitary
    rotated = [w @ s @ w.conj().T for s in sqg.space.basis]
    k = len(dec.blocks)
    alphas = dec.alphas
    ns = dec.multiplicities
    offs = dec.offsets
    loffs = _layer_offsets(ns)
    dim_l = loffs[-1]

    grid_rows: list[tuple[MatSubspace, ...]] = []
    embedded: list[np.ndarray] = []
    for i in range(k):
        row: list[MatSubspace] = []
        for j in range(k):
            pieces = [x[offs[i] : offs[i + 1], offs[j] : offs[j + 1]] for x in rotated]
            s_ij = orthonormalize(
                pieces, tol, shape=(alphas[i] * ns[i], alphas[j] * ns[j])
            )
            slices = [
                b.reshape(alphas[i], ns[i], alphas[j], ns[j])[0, :, 0, :]
                for b in s_ij.basis
            ]
            r_ij = orthonormalize(slices, tol, shape=(ns[i], ns[j]))
            model = orthonormalize(
                [
                    np.kron(_matrix_unit(r, s, alphas[i], alphas[j]), y)
                    for r in range(alphas[i])
                    for s in range(alphas[j])
                    for y in r_ij.basis
                ],
                tol,
                shape=s_ij.shape,
            )
            gap = max(subspace_defect(s_ij, model), subspace_defect(model, s_ij))
            if gap > tol.member_eps or s_ij.dim != alphas[i] * alphas[j] * r_ij.dim:
                raise FactorizationFailed(
                    f"block ({i},{j}) does not factor over its multiplicity "
                    f"layers (defect {gap:.3e}, dims {s_ij.dim} vs "
                    f"{alphas[i] * alphas[j]} x {r_ij.dim})"
                )
            row.append(r_ij)
            for y in r_ij.basis:
                m = np.zeros((dim_l, dim_l), dtype=np.complex128)
                m[loffs[i] : loffs[i + 1], loffs[j] : loffs[j + 1]] = y
                embedded.append(m)
        grid_rows.append(tuple(row))

    reduced = orthonormalize(embedded, tol, shape=(dim_l, dim_l))
    c_mats = [
        _matrix_unit(loffs[i] + a, loffs[i] + b, dim_l, dim_l)
        for i in range(k)
        for a in range(ns[i])
        for b in range(ns[i])
    ]
    c_alg = orthonormalize(c_mats, tol, shape=(dim_l, dim_l))

    kraus = []
    for i in range(k):
        for r in range(alphas[i]):
            v = np.zeros((dim_l, dec.total_dim), dtype=np.complex128)
            for c in range(ns[i]):
                v[loffs[i] + c, offs[i] + r * ns[i] + c] = 1.0
            kraus.append(v @ w)
    theta = KrausMap(dec.total_dim, dim_l, tuple(kraus), c_alg, sqg.algebra)
    validate_kraus(theta)

    result = SkeletonResult(reduced, c_alg, dec, tuple(grid_rows), theta)
    verdict = is_pullback_homomorphism(theta, result.reduced_quantum_graph(), sqg)
    if verdict is not PullbackVerdict.FULL_PULLBACK:
        raise FactorizationFailed(
            f"canonical amplification is not a full pullback (verdict {verdict.value})"
        )
    return result


def slice_independence_check(
    s_ij: MatSubspace,
    alpha_i: int,
    alpha_j: int,
    trials: int = 10,
    seed: int = 0,
) -> ConditionReport:
    """Re-slice a compressed block with random rank-one functionals.

    For a genuine multiplicity-layer block every slice spans the same reduced
    space as the corner slice; each trial reports the defect against that
    reference.
    """
    tol = s_ij.tol
    rows, cols = s_ij.shape
    if rows % alpha_i or cols % alpha_j:
        raise StructureMismatch(
            f"shape {s_ij.shape} does not split into {alpha_i} x {alpha_j} layers"
        )
    n_i, n_j = rows // alpha_i, cols // alpha_j
    tensors = [b.reshape(alpha_i, n_i, alpha_j, n_j) for b in s_ij.basis]
    reference = orthonormalize([t[0, :, 0, :] for t in tensors], tol, shape=(n_i, n_j))
    rng = np.random.default_rng(seed)
    conditions = []
    for t in range(trials):
        eta = rng.normal(size=alpha_i) + 1j * rng.normal(size=alpha_i)
        xi = rng.normal(size=alpha_j) + 1j * rng.normal(size=alpha_j)
        eta /= np.linalg.norm(eta)
        xi /= np.linalg.norm(xi)
        slices = [np.einsum("r,rasb,s->ab", eta.conj(), x, xi) for x in tensors]
        sliced = orthonormalize(slices, tol, shape=(n_i, n_j))
        gap = max(subspace_defect(sliced, reference), subspace_defect(reference, sliced))
        ok = sliced.dim == reference.dim and gap <= tol.member_eps
        conditions.append(Condition(f"trial_{t}", ok, gap))
    return ConditionReport(all(c.ok for c in conditions), tuple(conditions))


@dataclass(frozen=True)
class SkeletonFingerprint:
    """Conjugation- and permutation-invariant data of a skeleton.

    The color profile is always a sound refuter; the grids are the
    lexicographically minimal rearrangements and are only populated when the
    tie groups were small enough to enumerate (`exact`), so that comparing
    two fingerprints never refutes equivalent systems.
    """

    block_count: int
    multiplicities: tuple[int, ...]
    profile: tuple[str, ...]
    dim_grid: tuple[tuple[int, ...], ...]
    trace_grid: tuple[tuple[int, ...], ...]
    exact: bool
    digest: str


def _hash(payload: object) -> str:
    return hashlib.sha256(repr(payload).encode()).hexdigest()


def _block_grids(res: SkeletonResult) -> tuple[list[list[int]], list[list[int]]]:
    k = len(res.blocks.blocks)
    dims = [[res.slice_blocks[i][j].dim for j in range(k)] for i in range(k)]
    traces = [
        [product_span(res.slice_blocks[i][j], res.slice_blocks[j][i]).dim for j in range(k)]
        for i in range(k)
    ]
    return dims, traces


def _block_colors(
    ns: tuple[int, ...], dims: list[list[int]], traces: list[list[int]]
) -> list[str]:
    # Iterated neighborhood refinement, hashed per round so color values are
    # comparable across systems.  A fixed round count keeps two equal-sized
    # systems in lockstep.
    k = len(ns)
    colors = [_hash(("layer", ns[i])) for i in range(k)]
    for _ in range(k):
        colors = [
            _hash(
                (
                    colors[i],
                    sorted(
                        (colors[j], dims[i][j], dims[j][i], traces[i][j], traces[j][i])
                        for j in range(k)
                    ),
                )
            )
            for i in range(k)
        ]
    return colors


def skeleton_fingerprint(res: SkeletonResult) -> SkeletonFingerprint:
    ns = res.blocks.multiplicities
    k = len(ns)
    dims, traces = _block_grids(res)
    colors = _block_colors(ns, dims, traces)
    order = sorted(range(k), key=lambda i: colors[i])
    groups: list[list[int]] = []
    for idx in order:
        if groups and colors[groups[-1][-1]] == colors[idx]:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    count = 1
    for g in groups:
        count *= math.factorial(len(g))
    if count <= _CANONICAL_PERM_BUDGET:
        best = None
        for arrangement in itertools.product(*(itertools.permutations(g) for g in groups)):
            p = [i for grp in arrangement for i in grp]
            cand = (
                tuple(tuple(dims[p[i]][p[j]] for j in range(k)) for i in range(k)),
                tuple(tuple(traces[p[i]][p[j]] for j in range(k)) for i in range(k)),
            )
            if best is None or cand < best:
                best = cand
        dim_grid, trace_grid = best
        exact = True
    else:
        dim_grid, trace_grid = (), ()
        exact = False
    profile = tuple(sorted(colors))
    mults = tuple(sorted(ns))
    digest = _hash((k, mults, profile, exact, dim_grid, trace_grid))
    return SkeletonFingerprint(k, mults, profile, dim_grid, trace_grid, exact, digest)


def _fingerprint_mismatch(a: SkeletonFingerprint, b: SkeletonFingerprint) -> str | None:
    for field in ("block_count", "multiplicities", "profile", "dim_grid", "trace_grid"):
        if getattr(a, field) != getattr(b, field):
            return field
    return None


def tro_between_amplified_factors(m: TroSpace) -> np.ndarray:
    """Extract the unitary u from a TRO of the form M_{beta,alpha} ⊗ u.

    Requires [M*M] = M_alpha ⊗ I_n and [MM*] = M_beta ⊗ I_n; the matricized
    basis must then have a one-dimensional common right factor, recovered as
    the top right-singular vector and rescaled to a unitary.  The phase is
    fixed by making the first sizable entry of the first column real positive.
    """
    tol = m.tol
    alpha = math.isqrt(m.right_algebra.dim)
    beta = math.isqrt(m.left_algebra.dim)
    if alpha * alpha != m.right_algebra.dim or beta * beta != m.left_algebra.dim:
        raise StructureMismatch("product algebras are not full matrix algebras")
    dim_k, dim_h = m.space.shape
    if dim_h % alpha or dim_k % beta or dim_h // alpha != dim_k // beta:
        raise StructureMismatch("dimensions do not split as amplified factors")
    n = dim_h // alpha
    right_model = orthonormalize(
        [np.kron(_matrix_unit(r, s, alpha, alpha), np.eye(n)) for r in range(alpha) for s in range(alpha)],
        tol,
        shape=(dim_h, dim_h),
    )
    left_model = orthonormalize(
        [np.kron(_matrix_unit(r, s, beta, beta), np.eye(n)) for r in range(beta) for s in range(beta)],
        tol,
        shape=(dim_k, dim_k),
    )
    if not equals(m.right_algebra, right_model) or not equals(m.left_algebra, left_model):
        raise StructureMismatch("product algebras are not amplified matrix factors")

    stack = np.vstack(
        [
            b.reshape(beta, n, alpha, n).transpose(0, 2, 1, 3).reshape(beta * alpha, n * n)
            for b in m.space.basis
        ]
    )
    _, sv, vh = np.linalg.svd(stack, full_matrices=False)
    residual = float(np.linalg.norm(sv[1:]))
    if sv[0] < tol.member_eps or residual > tol.member_eps * max(sv[0], 1.0):
        raise StructureMismatch(
            f"basis does not share a common unitary factor (residual {residual:.3e})"
        )
    u = vh[0].reshape(n, n) * np.sqrt(n)
    if np.linalg.norm(u @ u.conj().T - np.eye(n)) > np.sqrt(n) * tol.member_eps:
        raise StructureMismatch("common factor is not unitary")
    col = u[:, 0]
    pivot = col[np.abs(col) > 1e-6][0]
    u = u * (abs(pivot) / pivot)
    return u


@dataclass(frozen=True)
class SearchBudget:
    restarts: int = 50
    iters: int = 500


class TroVerdict(enum.Enum):
    EQUIVALENT = "Equivalent"
    NOT_EQUIVALENT = "NotEquivalent"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class TroDecision:
    verdict: TroVerdict
    witness: TroSpace | None = None
    reason: str | None = None
    report: ConditionReport | None = None


def _as_graph(res: SkeletonResult) -> classical.Graph | None:
    """The skeleton as a plain graph when every multiplicity layer is a line."""
    ns = res.blocks.multiplicities
    if any(n != 1 for n in ns):
        return None
    k = len(ns)
    edges = [
        (i, j)
        for i in range(k)
        for j in range(i + 1, k)
        if res.slice_blocks[i][j].dim > 0
    ]
    return classical.Graph.make(k, edges)


def _skew_basis(n: int) -> list[np.ndarray]:
    out = [1j * _matrix_unit(a, a, n, n) for a in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            e_ab, e_ba = _matrix_unit(a, b, n, n), _matrix_unit(b, a, n, n)
            out.append((e_ab - e_ba) / np.sqrt(2))
            out.append(1j * (e_ab + e_ba) / np.sqrt(2))
    return out


def _alignment_objective(res_s, res_t, matching):
    """Objective and gradient for the block-unitary alignment search.

    Parameters are real coordinates of skew-hermitian generators per block;
    the unitary is assembled blockwise (source layer i lands on target layer
    matching[i]) and the objective is the summed squared projection defect of
    the rotated reduced system against the target reduced system.
    """
    ns = res_s.blocks.multiplicities
    loffs_s = _layer_offsets(ns)
    loffs_t = _layer_offsets(res_t.blocks.multiplicities)
    dim_l = loffs_s[-1]
    basis_s = res_s.reduced_system.basis
    basis_t = res_t.reduced_system.basis
    bases = [_skew_basis(n) for n in ns]
    sizes = [n * n for n in ns]
    splits = np.cumsum(sizes)[:-1]

    def unpack(x):
        mats = []
        for i, part in enumerate(np.split(x, splits)):
            mats.append(sum(c * b for c, b in zip(part, bases[i])))
        return mats

    def assemble(blocks_u):
        u = np.zeros((dim_l, dim_l), dtype=np.complex128)
        for i, ui in enumerate(blocks_u):
            t = matching[i]
            u[loffs_t[t] : loffs_t[t + 1], loffs_s[i] : loffs_s[i + 1]] = ui
        return u

    def func(x):
        xs = unpack(x)
        pairs = [scipy.linalg.expm(xi) for xi in xs]
        u = assemble(pairs)
        uh = u.conj().T
        f = 0.0
        g_full = np.zeros((dim_l, dim_l), dtype=np.complex128)
        for b in basis_s:
            moved = u @ b @ uh
            resid = moved - sum(np.vdot(c, moved) * c for c in basis_t)
            f += float(np.real(np.vdot(resid, resid)))
            g_full += 2.0 * (b @ uh @ resid.conj().T + b.conj().T @ uh @ resid)
        grad_parts = []
        for i, xi in enumerate(xs):
            t = matching[i]
            g_block = g_full[loffs_s[i] : loffs_s[i + 1], loffs_t[t] : loffs_t[t + 1]]
            _, frech = scipy.linalg.expm_frechet(xi, g_block)
            grad_parts.append(
                np.array([float(np.real(np.trace(frech @ bk))) for bk in bases[i]])
            )
        return f, np.concatenate(grad_parts)

    def unitary_of(x):
        return assemble([scipy.linalg.expm(xi) for xi in unpack(x)])

    n_params = int(sum(sizes))
    return func, unitary_of, n_params


def _consistent_matchings(res_s, res_t):
    """Bijections between layers preserving sizes and both invariant grids."""
    ns, nt = res_s.blocks.multiplicities, res_t.blocks.multiplicities
    k = len(ns)
    if len(nt) != k or sorted(ns) != sorted(nt):
        return
    dims_s, traces_s = _block_grids(res_s)
    dims_t, traces_t = _block_grids(res_t)
    candidates = [
        [
            j
            for j in range(k)
            if nt[j] == ns[i]
            and sorted(zip(dims_s[i], [r[i] for r in dims_s]))
            == sorted(zip(dims_t[j], [r[j] for r in dims_t]))
        ]
        for i in range(k)
    ]
    for perm in itertools.permutations(range(k)):
        if any(perm[i] not in candidates[i] for i in range(k)):
            continue
        if all(
            dims_s[i][j] == dims_t[perm[i]][perm[j]]
            and traces_s[i][j] == traces_t[perm[i]][perm[j]]
            for i in range(k)
            for j in range(k)
        ):
            yield perm


def _assemble_witness(res_s, res_t, u, sqg, tqg):
    """The TRO X_rho* X_theta for a skeleton-aligning unitary u, verified."""
    theta = res_s.canonical_pullback
    aligned = KrausMap(
        theta.dim_h,
        res_t.skeleton_dim,
        tuple(u @ v for v in theta.kraus),
        res_t.reduced_algebra,
        theta.codomain_algebra,
    )
    x_theta = kraus_space(aligned)
    x_rho = kraus_space(res_t.canonical_pullback)
    witness = TroSpace.from_space(product_span(adjoint_space(x_rho), x_theta))
    rep = verify_tro_equivalence(witness, sqg, tqg)
    return (witness if rep.ok else None), rep


def decide_tro_equivalence(
    sqg: QuantumGraph,
    tqg: QuantumGraph,
    budget: SearchBudget | None = None,
    seed: int = 0,
) -> TroDecision:
    """Decide TRO-equivalence of two multiplicity-free quantum graphs.

    Fingerprint mismatch refutes; graph-shaped skeletons are decided exactly
    through graph isomorphism; otherwise consistent layer matchings are
    enumerated and a block unitary aligning the reduced systems is searched
    for under the budget.  Every Equivalent verdict carries a witness TRO
    whose verification report is included.
    """
    budget = budget if budget is not None else SearchBudget()
    res_s = quantum_skeleton(sqg)
    res_t = quantum_skeleton(tqg)
    fp_s, fp_t = skeleton_fingerprint(res_s), skeleton_fingerprint(res_t)
    mismatch = _fingerprint_mismatch(fp_s, fp_t)
    if mismatch is not None:
        return TroDecision(
            TroVerdict.NOT_EQUIVALENT,
            reason=f"skeleton fingerprints differ in {mismatch}",
        )

    graph_s, graph_t = _as_graph(res_s), _as_graph(res_t)
    if graph_s is not None and graph_t is not None:
        iso = classical.graph_isomorphism(graph_s, graph_t)
        if iso is None:
            return TroDecision(
                TroVerdict.NOT_EQUIVALENT, reason="skeleton graphs are not isomorphic"
            )
        k = graph_s.n
        u = np.zeros((k, k), dtype=np.complex128)
        for i in range(k):
            u[iso.image[i], i] = 1.0
        witness, rep = _assemble_witness(res_s, res_t, u, sqg, tqg)
        if witness is None:
            raise InternalCheckError(
                "isomorphism witness failed verification: "
                + ", ".join(rep.failed())
            )
        return TroDecision(TroVerdict.EQUIVALENT, witness=witness, report=rep)

    rng = np.random.default_rng(seed)
    for matching in _consistent_matchings(res_s, res_t):
        func, unitary_of, n_params = _alignment_objective(res_s, res_t, matching)
        for restart in range(budget.restarts):
            x0 = (
                np.zeros(n_params)
                if restart == 0
                else rng.normal(scale=0.8, size=n_params)
            )
            opt = scipy.optimize.minimize(
                func,
                x0,
                jac=True,
                method="L-BFGS-B",
                options={"maxiter": budget.iters},
            )
            if opt.fun < 1e-10:
                witness, rep = _assemble_witness(
                    res_s, res_t, unitary_of(opt.x), sqg, tqg
                )
                if witness is not None:
                    return TroDecision(TroVerdict.EQUIVALENT, witness=witness, report=rep)
    return TroDecision(
        TroVerdict.UNDECIDED, reason="no aligning block unitary found within budget"
    )
