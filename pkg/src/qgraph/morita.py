"""Kraus maps, pullbacks and pushforwards, TRO construction and balancing.

The operations here connect unital completely positive maps to the subspace
machinery: a map is handled through a Kraus family {v_i} mapping H into K,
with the domain algebra B acting on K and the codomain algebra A acting on H,
so that phi(b) = sum_i v_i* b v_i.  The associated space X_phi = [B' v_i A']
carries all the structure this module reasons about: faithfulness is a rank
statement about [X_phi H], co-homomorphism conditions are inclusions of
triple products, and ternary rings of operators built from X_phi implement
equivalences of operator systems.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import algebras
from .algebras import QuantumGraph, generated_cstar, multiplier_algebra
from .errors import (
    Degenerate,
    InternalCheckError,
    NotStarHomomorphism,
    NotUnital,
    ShapeMismatch,
    ToleranceMismatch,
    ValidationFailed,
)
from .linalg import (
    MatSubspace,
    Tolerance,
    _numerical_rank,
    adjoint_space,
    bimodule_closure,
    contains,
    equals,
    orthonormalize,
    product_span,
    subspace_defect,
)

__all__ = [
    "Condition",
    "ConditionReport",
    "Faithfulness",
    "KrausMap",
    "PullbackVerdict",
    "TroSpace",
    "apply_dual",
    "apply_ucp",
    "balance_tro",
    "is_cohomomorphism",
    "is_faithful",
    "is_pullback_homomorphism",
    "is_star_homomorphism",
    "is_strong_cohomomorphism",
    "kraus_space",
    "mix_kraus",
    "pullback",
    "pushforward",
    "tro_from_space",
    "validate_kraus",
    "verify_balanced_equivalence",
    "verify_tro_equivalence",
]


class Condition(NamedTuple):
    """One named verification condition with its worst residual."""

    name: str
    ok: bool
    residual: float


@dataclass(frozen=True)
class ConditionReport:
    """Verdict plus the per-condition residuals backing it."""

    ok: bool
    conditions: tuple[Condition, ...]

    def residual(self, name: str) -> float:
        for c in self.conditions:
            if c.name == name:
                return c.residual
        raise KeyError(name)

    def failed(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.conditions if not c.ok)


def _report(conditions: Sequence[Condition]) -> ConditionReport:
    return ConditionReport(all(c.ok for c in conditions), tuple(conditions))


@dataclass(frozen=True)
class KrausMap:
    """A ucp map phi: B -> A given by Kraus operators v_i: H -> K.

    B acts on the K side (dim_k), A on the H side (dim_h), and
    phi(b) = sum_i v_i* b v_i.  Structural shape checks happen here;
    the numerical contract (unitality, range condition) is validate_kraus.
    """

    dim_h: int
    dim_k: int
    kraus: tuple[np.ndarray, ...]
    domain_algebra: MatSubspace
    codomain_algebra: MatSubspace

    def __post_init__(self) -> None:
        if self.dim_h < 1 or self.dim_k < 1:
            raise ValueError("dimensions must be positive")
        if not self.kraus:
            raise ValueError("a Kraus map needs at least one operator")
        mats = []
        for v in self.kraus:
            v = np.ascontiguousarray(v, dtype=np.complex128)
            if v.shape != (self.dim_k, self.dim_h):
                raise ShapeMismatch(
                    f"Kraus operator of shape {v.shape}, expected {(self.dim_k, self.dim_h)}"
                )
            if not np.all(np.isfinite(v)):
                raise ValueError("Kraus entries must be finite")
            v.flags.writeable = False
            mats.append(v)
        object.__setattr__(self, "kraus", tuple(mats))
        if self.domain_algebra.shape != (self.dim_k, self.dim_k):
            raise ShapeMismatch(
                f"domain algebra on {self.domain_algebra.shape}, expected K side {self.dim_k}"
            )
        if self.codomain_algebra.shape != (self.dim_h, self.dim_h):
            raise ShapeMismatch(
                f"codomain algebra on {self.codomain_algebra.shape}, expected H side {self.dim_h}"
            )
        if self.domain_algebra.tol != self.codomain_algebra.tol:
            raise ToleranceMismatch("domain and codomain algebras carry different tolerances")

    @property
    def tol(self) -> Tolerance:
        return self.domain_algebra.tol

    @property
    def rank(self) -> int:
        return len(self.kraus)


def apply_ucp(phi: KrausMap, b) -> np.ndarray:
    """phi(b) = sum_i v_i* b v_i, a dim_h x dim_h matrix."""
    b = np.asarray(b, dtype=np.complex128)
    if b.shape != (phi.dim_k, phi.dim_k):
        raise ShapeMismatch(f"argument shape {b.shape}, expected {(phi.dim_k,) * 2}")
    out = np.zeros((phi.dim_h, phi.dim_h), dtype=np.complex128)
    for v in phi.kraus:
        out += v.conj().T @ b @ v
    return out


def apply_dual(phi: KrausMap, a) -> np.ndarray:
    """The trace dual: sum_i v_i a v_i*, a dim_k x dim_k matrix."""
    a = np.asarray(a, dtype=np.complex128)
    if a.shape != (phi.dim_h, phi.dim_h):
        raise ShapeMismatch(f"argument shape {a.shape}, expected {(phi.dim_h,) * 2}")
    out = np.zeros((phi.dim_k, phi.dim_k), dtype=np.complex128)
    for v in phi.kraus:
        out += v @ a @ v.conj().T
    return out


def validate_kraus(phi: KrausMap) -> ConditionReport:
    """Check unitality and phi(B) contained in A; raise on failure.

    Both acting algebras are also checked to be unital *-algebras equal to
    their bicommutants, since every downstream commutant argument relies on
    that.  Returns the residual report when everything passes.
    """
    algebras._validate_algebra(phi.domain_algebra)
    algebras._validate_algebra(phi.codomain_algebra)
    gram = sum(v.conj().T @ v for v in phi.kraus)
    unit_res = float(np.linalg.norm(gram - np.eye(phi.dim_h)))
    if unit_res > phi.tol.member_eps:
        raise NotUnital(f"Kraus family is not unital (residual {unit_res:.3e})")
    range_res = 0.0
    for b in phi.domain_algebra.basis:
        _, r = contains(phi.codomain_algebra, apply_ucp(phi, b))
        range_res = max(range_res, r)
    if range_res > phi.tol.member_eps:
        raise ValidationFailed(
            f"image of the domain algebra leaves the codomain algebra (residual {range_res:.3e})"
        )
    return _report(
        [
            Condition("unital", True, unit_res),
            Condition("range", True, range_res),
        ]
    )


def mix_kraus(phi: KrausMap, isometry) -> KrausMap:
    """The same map with Kraus family w_a = sum_i omega[a, i] v_i.

    `isometry` is an r' x r matrix with omega* omega = I_r, so the mixed
    family represents the identical ucp map; used to exercise
    representation independence.
    """
    omega = np.asarray(isometry, dtype=np.complex128)
    r = phi.rank
    if omega.ndim != 2 or omega.shape[1] != r:
        raise ShapeMismatch(f"mixing matrix {omega.shape} does not act on {r} operators")
    if np.linalg.norm(omega.conj().T @ omega - np.eye(r)) > phi.tol.member_eps:
        raise ValidationFailed("mixing matrix is not an isometry")
    mixed = [
        sum(omega[a, i] * phi.kraus[i] for i in range(r))
        for a in range(omega.shape[0])
    ]
    return KrausMap(phi.dim_h, phi.dim_k, tuple(mixed), phi.domain_algebra, phi.codomain_algebra)


def kraus_space(phi: KrausMap) -> MatSubspace:
    """X_phi = [B' v_i A'], the bimodule closure of the Kraus span.

    Independent of the chosen Kraus representation of the map.
    """
    span = orthonormalize(list(phi.kraus), phi.tol, shape=(phi.dim_k, phi.dim_h))
    left = algebras.commutant(phi.domain_algebra)
    right = algebras.commutant(phi.codomain_algebra)
    return bimodule_closure(span, left, right)


class Faithfulness(NamedTuple):
    faithful: bool
    support_dim: int
    support: np.ndarray


def is_faithful(phi: KrausMap) -> Faithfulness:
    """Faithful iff [X_phi H] is all of K; also returns the support projection.

    [X_phi H] equals the column span of {b v_i : b in B' basis}, since the
    A'-action on the right cannot change column spans.
    """
    left = algebras.commutant(phi.domain_algebra)
    cols = np.hstack([b @ v for b in left.basis for v in phi.kraus])
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    rank = _numerical_rank(s, phi.tol)
    basis = u[:, :rank]
    support = basis @ basis.conj().T
    return Faithfulness(rank == phi.dim_k, rank, support)


def _require_system_on(space: MatSubspace, n: int, side: str) -> None:
    if space.shape != (n, n):
        raise ShapeMismatch(f"system on {space.shape} does not live on the {side} side ({n})")


def pushforward(s: QuantumGraph, phi: KrausMap) -> MatSubspace:
    """S^{->phi}: the B'-bimodule generated by {v_i s v_j*}, living on K."""
    _require_system_on(s.space, phi.dim_h, "H")
    mats = [v @ x @ w.conj().T for v in phi.kraus for x in s.space.basis for w in phi.kraus]
    span = orthonormalize(mats, phi.tol, shape=(phi.dim_k, phi.dim_k))
    left = algebras.commutant(phi.domain_algebra)
    return bimodule_closure(span, left, left)


def pullback(t: QuantumGraph, phi: KrausMap) -> MatSubspace:
    """T^{<-phi} = span{v_i* t v_j}, living on H.

    The A'-bimodule closure of that span is provably a no-op; the code
    still computes it and warns if the two differ, because a gap here means
    the numerics (not the mathematics) went wrong.
    """
    _require_system_on(t.space, phi.dim_k, "K")
    mats = [v.conj().T @ x @ w for v in phi.kraus for x in t.space.basis for w in phi.kraus]
    span = orthonormalize(mats, phi.tol, shape=(phi.dim_h, phi.dim_h))
    right = algebras.commutant(phi.codomain_algebra)
    closed = bimodule_closure(span, right, right)
    gap = subspace_defect(closed, span)
    if closed.dim != span.dim or gap > phi.tol.member_eps:
        warnings.warn(
            f"pullback span was not already bimodule-closed (defect {gap:.3e}); "
            "using the closure",
            RuntimeWarning,
            stacklevel=2,
        )
    return closed


def _triple(a: MatSubspace, b: MatSubspace, c: MatSubspace) -> MatSubspace:
    """[a b c] staged as [[a b] c]; associativity makes the staging free."""
    return product_span(product_span(a, b), c)


def is_cohomomorphism(phi: KrausMap, t: QuantumGraph, s: QuantumGraph) -> bool:
    """X_phi* T X_phi contained in S."""
    x = kraus_space(phi)
    pulled = _triple(adjoint_space(x), t.space, x)
    return subspace_defect(pulled, s.space) <= phi.tol.member_eps


def is_strong_cohomomorphism(phi: KrausMap, s: QuantumGraph, t: QuantumGraph) -> bool:
    """Both inclusions: X* T X in S and X S X* in T."""
    x = kraus_space(phi)
    pulled = _triple(adjoint_space(x), t.space, x)
    pushed = _triple(x, s.space, adjoint_space(x))
    return (
        subspace_defect(pulled, s.space) <= phi.tol.member_eps
        and subspace_defect(pushed, t.space) <= phi.tol.member_eps
    )


def is_star_homomorphism(phi: KrausMap) -> bool:
    """Multiplicativity and *-preservation of phi on the domain algebra.

    Two independent routes must agree: the direct check on all basis pairs,
    and the criterion that every v_i v_j* commutes with B.  A split verdict
    is impossible mathematically, so it raises instead of guessing.
    """
    eps = phi.tol.member_eps
    scale = max(1.0, float(np.sqrt(phi.dim_h)))
    direct = True
    for b1 in phi.domain_algebra.basis:
        im1 = apply_ucp(phi, b1)
        if np.linalg.norm(apply_ucp(phi, b1.conj().T) - im1.conj().T) > eps * scale:
            direct = False
            break
        for b2 in phi.domain_algebra.basis:
            lhs = apply_ucp(phi, b1 @ b2)
            if np.linalg.norm(lhs - im1 @ apply_ucp(phi, b2)) > eps * scale:
                direct = False
                break
        if not direct:
            break

    comm = algebras.commutant(phi.domain_algebra)
    via_commutant = True
    for v in phi.kraus:
        for w in phi.kraus:
            prod = v @ w.conj().T
            res = float(np.linalg.norm(prod - comm.project(prod)))
            if res > eps * scale:
                via_commutant = False
                break
        if not via_commutant:
            break

    if direct != via_commutant:
        raise InternalCheckError(
            f"multiplicativity checks disagree (direct {direct}, commutant {via_commutant})"
        )
    return direct


class PullbackVerdict(enum.Enum):
    PULLBACK = "Pullback"
    FULL_PULLBACK = "FullPullback"
    NO = "No"


def is_pullback_homomorphism(
    theta: KrausMap, t: QuantumGraph, s: QuantumGraph
) -> PullbackVerdict:
    """Classify a *-homomorphism theta against the pair (T on K, S on H).

    Pullback means S = T^{<-theta}.  Full additionally means theta is
    faithful, equivalently T = S^{->theta}; the two characterizations are
    computed independently and must agree.
    """
    if not is_star_homomorphism(theta):
        raise NotStarHomomorphism("the map is not a unital *-homomorphism")
    if not equals(s.space, pullback(t, theta)):
        return PullbackVerdict.NO
    faithful = is_faithful(theta).faithful
    push_matches = equals(t.space, pushforward(s, theta))
    if faithful != push_matches:
        raise InternalCheckError(
            f"fullness characterizations disagree (faithful {faithful}, "
            f"pushforward equality {push_matches})"
        )
    return PullbackVerdict.FULL_PULLBACK if faithful else PullbackVerdict.PULLBACK


@dataclass(frozen=True)
class TroSpace:
    """A candidate ternary ring of operators M in B(H, K) with cached products.

    left_algebra is the closed span [M M*] on K, right_algebra is [M* M] on
    H.  For an actual TRO both are algebras; nothing is enforced here, the
    verification report is what certifies the axioms.
    """

    space: MatSubspace
    left_algebra: MatSubspace
    right_algebra: MatSubspace

    @staticmethod
    def from_space(space: MatSubspace) -> "TroSpace":
        adj = adjoint_space(space)
        return TroSpace(space, product_span(space, adj), product_span(adj, space))

    @property
    def tol(self) -> Tolerance:
        return self.space.tol


def _column_space_dim(space: MatSubspace) -> int:
    cols = np.hstack([m for m in space.basis]) if space.dim else np.zeros((space.dim_k, 1))
    s = np.linalg.svd(cols, compute_uv=False)
    return _numerical_rank(s, space.tol)


def tro_from_space(x: MatSubspace) -> TroSpace:
    """M = [X C*(X*X)], a non-degenerate TRO when X acts non-degenerately.

    Degenerate means the columns of X miss part of K or the columns of X*
    miss part of H; both are rejected up front, and the TRO axioms of the
    result are verified before returning.
    """
    if _column_space_dim(x) != x.dim_k:
        raise Degenerate("the space does not span the codomain: [XH] is a proper subspace")
    if _column_space_dim(adjoint_space(x)) != x.dim_h:
        raise Degenerate("the adjoint space does not span the domain: [X*K] is a proper subspace")
    right_cstar = generated_cstar(product_span(adjoint_space(x), x))
    m = product_span(x, right_cstar)
    tro = TroSpace.from_space(m)
    axiom = subspace_defect(_triple(m, adjoint_space(m), m), m)
    if axiom > x.tol.member_eps:
        raise Degenerate(f"triple product leaves the space (defect {axiom:.3e})")
    ok_r, res_r = contains(tro.right_algebra, np.eye(x.dim_h, dtype=np.complex128))
    ok_l, res_l = contains(tro.left_algebra, np.eye(x.dim_k, dtype=np.complex128))
    if not ok_r:
        raise Degenerate(f"identity missing from [M*M] (residual {res_r:.3e})")
    if not ok_l:
        raise Degenerate(f"identity missing from [MM*] (residual {res_l:.3e})")
    return tro


def _tro_conditions(m: MatSubspace) -> list[Condition]:
    """TRO axiom and non-degeneracy on both sides."""
    eps = m.tol.member_eps
    adj = adjoint_space(m)
    axiom = subspace_defect(_triple(m, adj, m), m)
    _, nd_h = contains(product_span(adj, m), np.eye(m.dim_h, dtype=np.complex128))
    _, nd_k = contains(product_span(m, adj), np.eye(m.dim_k, dtype=np.complex128))
    return [
        Condition("tro_axiom", axiom <= eps, axiom),
        Condition("nondegenerate_domain", nd_h <= eps, nd_h),
        Condition("nondegenerate_codomain", nd_k <= eps, nd_k),
    ]


def _span_conditions(
    m: MatSubspace, h_space: MatSubspace, k_space: MatSubspace, prefix: str = ""
) -> list[Condition]:
    """[M* k_space M] = h_space and [M h_space M*] = k_space, split by direction."""
    eps = m.tol.member_eps
    adj = adjoint_space(m)
    pulled = _triple(adj, k_space, m)
    pushed = _triple(m, h_space, adj)
    pull_in = subspace_defect(pulled, h_space)
    pull_onto = subspace_defect(h_space, pulled)
    push_in = subspace_defect(pushed, k_space)
    push_onto = subspace_defect(k_space, pushed)
    return [
        Condition(prefix + "pulls_into_domain", pull_in <= eps, pull_in),
        Condition(prefix + "pushes_into_codomain", push_in <= eps, push_in),
        Condition(prefix + "pulls_onto_domain", pull_onto <= eps, pull_onto),
        Condition(prefix + "pushes_onto_codomain", push_onto <= eps, push_onto),
    ]


def verify_tro_equivalence(m: TroSpace, s: QuantumGraph, t: QuantumGraph) -> ConditionReport:
    """Certify that M implements an equivalence between S (on H) and T (on K).

    Conditions: M is a non-degenerate TRO, [M* T M] = S and [M S M*] = T,
    with the inclusions and the spanning directions reported separately.
    """
    _require_system_on(s.space, m.space.dim_h, "H")
    _require_system_on(t.space, m.space.dim_k, "K")
    return _report(_tro_conditions(m.space) + _span_conditions(m.space, s.space, t.space))


def balance_tro(m: TroSpace, s: QuantumGraph, t: QuantumGraph) -> TroSpace:
    """N = [A_T M A_S], the multiplier-balanced version of M.

    Requires a verified equivalence and multiplicity-free systems; the
    balanced space then satisfies [N* N] = A_S and [N N*] = A_T, which is
    checked rather than trusted.
    """
    rep = verify_tro_equivalence(m, s, t)
    if not rep.ok:
        raise ValidationFailed(
            f"cannot balance an unverified equivalence (failed: {', '.join(rep.failed())})"
        )
    mult_s = multiplier_algebra(s.system)
    mult_t = multiplier_algebra(t.system)
    n = _triple(mult_t, m.space, mult_s)
    balanced = TroSpace.from_space(n)
    if not equals(balanced.right_algebra, mult_s):
        raise InternalCheckError("[N*N] differs from the domain multiplier algebra")
    if not equals(balanced.left_algebra, mult_t):
        raise InternalCheckError("[NN*] differs from the codomain multiplier algebra")
    return balanced


def verify_balanced_equivalence(
    m: TroSpace | KrausMap, s: QuantumGraph, t: QuantumGraph
) -> ConditionReport:
    """Certify a simultaneous equivalence of the systems and their algebras.

    With a TroSpace: M must be a B'-A'-bimodule and implement both S <-> T
    and A <-> B.  With a KrausMap: the four inclusion conditions on X_phi
    are checked instead (the Kraus form of the same statement).
    """
    if isinstance(m, KrausMap):
        x = kraus_space(m)
        _require_system_on(s.space, m.dim_h, "H")
        _require_system_on(t.space, m.dim_k, "K")
        adj = adjoint_space(x)
        eps = m.tol.member_eps
        faith = is_faithful(m)
        checks = [
            ("system_pullback", subspace_defect(_triple(adj, t.space, x), s.space)),
            ("system_pushforward", subspace_defect(_triple(x, s.space, adj), t.space)),
            ("algebra_pullback", subspace_defect(_triple(adj, t.algebra, x), s.algebra)),
            ("algebra_pushforward", subspace_defect(_triple(x, s.algebra, adj), t.algebra)),
        ]
        conditions = [
            Condition("faithful", faith.faithful, float(m.dim_k - faith.support_dim))
        ]
        conditions += [Condition(name, r <= eps, r) for name, r in checks]
        return _report(conditions)

    _require_system_on(s.space, m.space.dim_h, "H")
    _require_system_on(t.space, m.space.dim_k, "K")
    eps = m.tol.member_eps
    closed = bimodule_closure(m.space, t.algebra_commutant, s.algebra_commutant)
    bimod = subspace_defect(closed, m.space)
    conditions = [Condition("commutant_bimodule", bimod <= eps, bimod)]
    conditions += _tro_conditions(m.space)
    conditions += _span_conditions(m.space, s.space, t.space, prefix="system_")
    conditions += _span_conditions(m.space, s.algebra, t.algebra, prefix="algebra_")
    return _report(conditions)
