"""Kraus-map layer: pullbacks, pushforwards, homomorphism verdicts, TRO machinery."""

import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgraph import algebras as alg
from qgraph import classical as cl
from qgraph import morita as mo
from qgraph.errors import (
    Degenerate,
    NotIrreducible,
    NotStarHomomorphism,
    NotUnital,
    ShapeMismatch,
    ToleranceMismatch,
    ValidationFailed,
)
from qgraph.linalg import (
    Tolerance,
    adjoint_space,
    contains,
    equals,
    orthonormalize,
    product_span,
    subspace_defect,
)

TOL = Tolerance()

# Six-vertex blow-up of a path with clique sizes 2, 1, 3; its twin classes
# are {0,1}, {2}, {3,4,5} and its skeleton is the path on three vertices.
SIX_A = cl.Graph.make(
    6,
    [(0, 1), (0, 2), (1, 2), (2, 3), (2, 4), (2, 5), (3, 4), (3, 5), (4, 5)],
)


def unit(i, j, n, m=None):
    m = n if m is None else m
    e = np.zeros((n, m), dtype=complex)
    e[i, j] = 1.0
    return e


def span(*mats):
    return orthonormalize([np.asarray(m, dtype=complex) for m in mats], TOL)


def diag_algebra(n):
    return span(*(unit(i, i, n) for i in range(n)))


def full_system(n):
    """M_n as a quantum graph over the full algebra."""
    return alg.validate_quantum_graph(
        span(*(unit(i, j, n) for i in range(n) for j in range(n))),
        alg.full_matrix_algebra(n, TOL),
    )


def haar_unitary(rng, n):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_unital_kraus(rng, dim_h, dim_k, r):
    """r Kraus operators dim_k x dim_h with sum v*v = I, via a stacked isometry."""
    assert r * dim_k >= dim_h
    g = rng.normal(size=(r * dim_k, dim_h)) + 1j * rng.normal(size=(r * dim_k, dim_h))
    q, _ = np.linalg.qr(g)
    return tuple(q[i * dim_k : (i + 1) * dim_k] for i in range(r))


def amplification_map():
    """theta(x) = x (+) x from M2 into M4, with its graph pair (T, S)."""
    v1 = np.hstack([np.eye(2), np.zeros((2, 2))]).astype(complex)
    v2 = np.hstack([np.zeros((2, 2)), np.eye(2)]).astype(complex)
    b = alg.full_matrix_algebra(2, TOL)
    a = span(*(np.kron(np.eye(2), unit(i, j, 2)) for i in range(2) for j in range(2)))
    theta = mo.KrausMap(4, 2, (v1, v2), b, a)
    t = alg.validate_quantum_graph(span(np.eye(2), unit(0, 1, 2), unit(1, 0, 2)), b)
    s_space = span(
        *(
            np.kron(unit(i, j, 2), t_el)
            for i in range(2)
            for j in range(2)
            for t_el in (np.eye(2), unit(0, 1, 2), unit(1, 0, 2))
        )
    )
    s = alg.validate_quantum_graph(s_space, a)
    return theta, t, s


def diagonal_mixing_channel():
    """Faithful ucp map on D3 built from six scaled matrix units.

    Each diagonal unit is sent to the average of two others, so the map is
    unital and faithful but squares do not survive: it is not multiplicative.
    """
    c = 1 / np.sqrt(2)
    pairs = [(0, 0), (1, 0), (1, 1), (2, 1), (0, 2), (2, 2)]
    kraus = tuple(c * unit(i, j, 3) for i, j in pairs)
    d3 = diag_algebra(3)
    return mo.KrausMap(3, 3, kraus, d3, d3)


def identity_channel(n):
    full = alg.full_matrix_algebra(n, TOL)
    return mo.KrausMap(n, n, (np.eye(n, dtype=complex),), full, full)


class TestKrausValidation:
    def test_amplification_valid(self):
        theta, _, _ = amplification_map()
        rep = mo.validate_kraus(theta)
        assert rep.ok
        assert rep.residual("unital") < 1e-12
        assert rep.residual("range") < 1e-12

    def test_single_unitary_valid(self):
        rng = np.random.default_rng(0)
        u = haar_unitary(rng, 3)
        full = alg.full_matrix_algebra(3, TOL)
        phi = mo.KrausMap(3, 3, (u,), full, full)
        assert mo.validate_kraus(phi).ok

    def test_single_matrix_unit_not_unital(self):
        full = alg.full_matrix_algebra(2, TOL)
        phi = mo.KrausMap(2, 2, (unit(0, 0, 2),), full, full)
        with pytest.raises(NotUnital):
            mo.validate_kraus(phi)

    def test_range_violation(self):
        # Hadamard conjugation maps diagonals out of the diagonal algebra.
        h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        d2 = diag_algebra(2)
        phi = mo.KrausMap(2, 2, (h,), d2, d2)
        with pytest.raises(ValidationFailed):
            mo.validate_kraus(phi)

    def test_wrong_kraus_shape(self):
        full = alg.full_matrix_algebra(2, TOL)
        with pytest.raises(ShapeMismatch):
            mo.KrausMap(3, 2, (np.eye(2, dtype=complex),), full, full)

    def test_empty_kraus_family(self):
        full = alg.full_matrix_algebra(2, TOL)
        with pytest.raises(ValueError):
            mo.KrausMap(2, 2, (), full, full)

    def test_nonfinite_entries(self):
        full = alg.full_matrix_algebra(2, TOL)
        bad = np.array([[np.nan, 0], [0, 1]], dtype=complex)
        with pytest.raises(ValueError):
            mo.KrausMap(2, 2, (bad,), full, full)

    def test_tolerance_mismatch(self):
        full = alg.full_matrix_algebra(2, TOL)
        other = alg.full_matrix_algebra(2, Tolerance(rank_eps=1e-7))
        with pytest.raises(ToleranceMismatch):
            mo.KrausMap(2, 2, (np.eye(2, dtype=complex),), full, other)

    def test_kraus_arrays_frozen(self):
        theta, _, _ = amplification_map()
        with pytest.raises(ValueError):
            theta.kraus[0][0, 0] = 5.0


class TestApply:
    def test_identity_channel(self):
        phi = identity_channel(3)
        rng = np.random.default_rng(1)
        b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        assert np.allclose(mo.apply_ucp(phi, b), b)
        assert np.allclose(mo.apply_dual(phi, b), b)

    def test_diagonal_mixing_values(self):
        phi = diagonal_mixing_channel()
        expected = {
            0: 0.5 * (unit(0, 0, 3) + unit(2, 2, 3)),
            1: 0.5 * (unit(0, 0, 3) + unit(1, 1, 3)),
            2: 0.5 * (unit(1, 1, 3) + unit(2, 2, 3)),
        }
        for a, image in expected.items():
            assert np.allclose(mo.apply_ucp(phi, unit(a, a, 3)), image)

    def test_apply_shape_checks(self):
        theta, _, _ = amplification_map()
        with pytest.raises(ShapeMismatch):
            mo.apply_ucp(theta, np.eye(4))
        with pytest.raises(ShapeMismatch):
            mo.apply_dual(theta, np.eye(2))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_dual_preserves_trace(self, seed):
        # The dual of a unital map is trace preserving.
        rng = np.random.default_rng(seed)
        dim_h, dim_k = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        r = int(rng.integers(1, 4))
        while r * dim_k < dim_h:
            r += 1
        kraus = random_unital_kraus(rng, dim_h, dim_k, r)
        phi = mo.KrausMap(
            dim_h,
            dim_k,
            kraus,
            alg.full_matrix_algebra(dim_k, TOL),
            alg.full_matrix_algebra(dim_h, TOL),
        )
        a = rng.normal(size=(dim_h, dim_h)) + 1j * rng.normal(size=(dim_h, dim_h))
        assert abs(np.trace(mo.apply_dual(phi, a)) - np.trace(a)) < 1e-10


class TestKrausSpace:
    def test_amplification_space(self):
        theta, _, _ = amplification_map()
        x = mo.kraus_space(theta)
        assert x.dim == 2
        assert equals(x, span(theta.kraus[0], theta.kraus[1]))

    def test_full_algebras_no_growth(self):
        # Scalar commutants on both sides leave the plain span untouched.
        rng = np.random.default_rng(7)
        kraus = random_unital_kraus(rng, 3, 2, 3)
        phi = mo.KrausMap(
            3, 2, kraus, alg.full_matrix_algebra(2, TOL), alg.full_matrix_algebra(3, TOL)
        )
        assert equals(mo.kraus_space(phi), orthonormalize(list(kraus), TOL))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15, deadline=None)
    def test_mixing_invariance(self, seed):
        # An isometry recombination is the same map, so every derived
        # object has to agree: the space, both transported systems.
        rng = np.random.default_rng(seed)
        theta, t, s = amplification_map()
        r_out = int(rng.integers(2, 5))
        g = rng.normal(size=(r_out, 2)) + 1j * rng.normal(size=(r_out, 2))
        q, _ = np.linalg.qr(g)
        mixed = mo.mix_kraus(theta, q)
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        assert np.allclose(mo.apply_ucp(mixed, b), mo.apply_ucp(theta, b))
        assert equals(mo.kraus_space(mixed), mo.kraus_space(theta))
        assert equals(mo.pullback(t, mixed), mo.pullback(t, theta))
        assert equals(mo.pushforward(s, mixed), mo.pushforward(s, theta))

    def test_mixing_rejects_non_isometry(self):
        theta, _, _ = amplification_map()
        with pytest.raises(ValidationFailed):
            mo.mix_kraus(theta, 2.0 * np.eye(2))


class TestFaithfulness:
    def test_amplification_faithful(self):
        theta, _, _ = amplification_map()
        faith = mo.is_faithful(theta)
        assert faith.faithful
        assert faith.support_dim == 2
        assert np.allclose(faith.support, np.eye(2))

    def test_diagonal_mixing_faithful(self):
        assert mo.is_faithful(diagonal_mixing_channel()).faithful

    def test_non_surjective_classical_map(self):
        # Constant vertex map: the channel only sees one target coordinate.
        k3 = cl.complete_graph(3)
        target = cl.Graph.make(2, [])
        f = cl.VertexMap(k3, target, (0, 0, 0))
        theta = cl.canonical_pullback_channel(f, TOL)
        faith = mo.is_faithful(theta)
        assert not faith.faithful
        assert faith.support_dim == 1
        assert np.allclose(faith.support, np.diag([1.0, 0.0]))

    def test_support_is_projection(self):
        k3 = cl.complete_graph(3)
        target = cl.Graph.make(2, [])
        theta = cl.canonical_pullback_channel(cl.VertexMap(k3, target, (0, 0, 0)), TOL)
        p = mo.is_faithful(theta).support
        assert np.allclose(p @ p, p)
        assert np.allclose(p.conj().T, p)


class TestPullbackPushforward:
    def test_identity_fixpoints(self):
        s = full_system(3)
        phi = identity_channel(3)
        assert equals(mo.pullback(s, phi), s.space)
        assert equals(mo.pushforward(s, phi), s.space)

    def test_amplification_pullback_is_tensor(self):
        theta, t, s = amplification_map()
        pulled = mo.pullback(t, theta)
        assert pulled.dim == 12
        m2 = span(*(unit(i, j, 2) for i in range(2) for j in range(2)))
        assert equals(pulled, alg.tensor_system(m2, t.space))
        assert equals(pulled, s.space)

    def test_pullback_closure_is_silent(self):
        theta, t, _ = amplification_map()
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            mo.pullback(t, theta)

    def test_classical_quotient_pullback(self):
        skel, quotient = cl.skeleton_graph(SIX_A)
        theta = cl.canonical_pullback_channel(quotient, TOL)
        pulled = mo.pullback(cl.graph_operator_system(skel, TOL), theta)
        assert equals(pulled, cl.graph_operator_system(SIX_A, TOL).space)

    def test_diagonal_mixing_pullback_is_everything(self):
        # The pullback of the edgeless diagonal system under the mixing
        # channel fills the whole matrix algebra.
        phi = diagonal_mixing_channel()
        edgeless = alg.validate_quantum_graph(diag_algebra(3), diag_algebra(3))
        pulled = mo.pullback(edgeless, phi)
        assert pulled.dim == 9

    def test_pushforward_of_scalars_contains_identity(self):
        rng = np.random.default_rng(5)
        u = haar_unitary(rng, 2)
        full = alg.full_matrix_algebra(2, TOL)
        phi = mo.KrausMap(2, 2, (u,), full, full)
        scalars = alg.validate_quantum_graph(span(np.eye(2)), full)
        pushed = mo.pushforward(scalars, phi)
        ok, _ = contains(pushed, np.eye(2))
        assert ok and pushed.dim == 1

    def test_shape_mismatch(self):
        theta, t, s = amplification_map()
        with pytest.raises(ShapeMismatch):
            mo.pullback(s, theta)
        with pytest.raises(ShapeMismatch):
            mo.pushforward(t, theta)


class TestCohomomorphisms:
    def test_amplification_strong(self):
        theta, t, s = amplification_map()
        assert mo.is_cohomomorphism(theta, t, s)
        assert mo.is_strong_cohomomorphism(theta, s, t)

    def test_full_systems_trivially_strong(self):
        rng = np.random.default_rng(11)
        kraus = random_unital_kraus(rng, 3, 2, 2)
        phi = mo.KrausMap(
            3, 2, kraus, alg.full_matrix_algebra(2, TOL), alg.full_matrix_algebra(3, TOL)
        )
        assert mo.is_strong_cohomomorphism(phi, full_system(3), full_system(2))

    def test_mixing_channel_fails_into_diagonal(self):
        # Pulling the full system back through the mixing channel lands
        # outside the edgeless diagonal system.
        phi = diagonal_mixing_channel()
        t_full = alg.validate_quantum_graph(
            span(*(unit(i, j, 3) for i in range(3) for j in range(3))), diag_algebra(3)
        )
        s_edgeless = alg.validate_quantum_graph(diag_algebra(3), diag_algebra(3))
        assert not mo.is_cohomomorphism(phi, t_full, s_edgeless)


class TestStarHomomorphism:
    def test_amplification_is_star_hom(self):
        theta, _, _ = amplification_map()
        assert mo.is_star_homomorphism(theta)
        # The cross products are scalar: v1 v2* = 0 and v1 v1* = I.
        v1, v2 = theta.kraus
        assert np.allclose(v1 @ v2.conj().T, 0)
        assert np.allclose(v1 @ v1.conj().T, np.eye(2))

    def test_classical_channels_are_star_homs(self):
        skel, quotient = cl.skeleton_graph(SIX_A)
        theta = cl.canonical_pullback_channel(quotient, TOL)
        assert mo.is_star_homomorphism(theta)

    def test_diagonal_mixing_is_not(self):
        phi = diagonal_mixing_channel()
        assert not mo.is_star_homomorphism(phi)
        image = mo.apply_ucp(phi, unit(0, 0, 3))
        assert np.linalg.norm(image @ image - image) > 0.1

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15, deadline=None)
    def test_every_vertex_map_channel_is_star_hom(self, seed):
        # Complete graphs admit every vertex map as a pullback map.
        rng = np.random.default_rng(seed)
        n_tgt = int(rng.integers(2, 5))
        n_src = int(rng.integers(2, 6))
        src = cl.complete_graph(n_src)
        tgt = cl.complete_graph(n_tgt)
        image = tuple(int(rng.integers(0, n_tgt)) for _ in range(n_src))
        theta = cl.canonical_pullback_channel(cl.VertexMap(src, tgt, image), TOL)
        assert mo.is_star_homomorphism(theta)
        # The column criterion holds operator by operator.
        comm = alg.commutant(theta.domain_algebra)
        for v, w in itertools.product(theta.kraus, repeat=2):
            prod = v @ w.conj().T
            assert np.linalg.norm(prod - comm.project(prod)) < 1e-10


class TestPullbackHomomorphism:
    def test_amplification_full(self):
        theta, t, s = amplification_map()
        assert mo.is_pullback_homomorphism(theta, t, s) is mo.PullbackVerdict.FULL_PULLBACK

    def test_quotient_channel_full(self):
        skel, quotient = cl.skeleton_graph(SIX_A)
        theta = cl.canonical_pullback_channel(quotient, TOL)
        t = cl.graph_operator_system(skel, TOL)
        s = cl.graph_operator_system(SIX_A, TOL)
        assert mo.is_pullback_homomorphism(theta, t, s) is mo.PullbackVerdict.FULL_PULLBACK

    def test_constant_map_not_full(self):
        # Constant image misses a target vertex: still a pullback of the
        # two-point edgeless system, but no longer faithful.
        k3 = cl.complete_graph(3)
        target = cl.Graph.make(2, [])
        theta = cl.canonical_pullback_channel(cl.VertexMap(k3, target, (0, 0, 0)), TOL)
        t = cl.graph_operator_system(target, TOL)
        s = full_system(3)
        assert mo.is_pullback_homomorphism(theta, t, s) is mo.PullbackVerdict.PULLBACK

    def test_wrong_system_says_no(self):
        skel, quotient = cl.skeleton_graph(SIX_A)
        theta = cl.canonical_pullback_channel(quotient, TOL)
        t = cl.graph_operator_system(skel, TOL)
        s_wrong = cl.graph_operator_system(cl.complete_graph(6), TOL)
        assert mo.is_pullback_homomorphism(theta, t, s_wrong) is mo.PullbackVerdict.NO

    def test_requires_star_homomorphism(self):
        phi = diagonal_mixing_channel()
        edgeless = alg.validate_quantum_graph(diag_algebra(3), diag_algebra(3))
        with pytest.raises(NotStarHomomorphism):
            mo.is_pullback_homomorphism(phi, edgeless, edgeless)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=10, deadline=None)
    def test_random_quotients_are_full(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 7))
        edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < 0.5]
        g = cl.Graph.make(n, edges)
        skel, quotient = cl.skeleton_graph(g)
        theta = cl.canonical_pullback_channel(quotient, TOL)
        t = cl.graph_operator_system(skel, TOL)
        s = cl.graph_operator_system(g, TOL)
        assert mo.is_pullback_homomorphism(theta, t, s) is mo.PullbackVerdict.FULL_PULLBACK
        # Full pullback round trip in both directions.
        assert equals(s.space, mo.pullback(t, theta))
        assert equals(t.space, mo.pushforward(s, theta))
        assert mo.is_faithful(theta).faithful


def rect_space(n_rows, n_cols):
    return span(*(unit(i, j, n_rows, n_cols) for i in range(n_rows) for j in range(n_cols)))


class TestTroFromSpace:
    def test_full_rectangular(self):
        x = rect_space(2, 3)
        tro = mo.tro_from_space(x)
        assert equals(tro.space, x)
        assert tro.left_algebra.dim == 4
        assert tro.right_algebra.dim == 9

    def test_amplification_kraus_span(self):
        theta, _, _ = amplification_map()
        tro = mo.tro_from_space(mo.kraus_space(theta))
        assert tro.space.dim == 2
        ok, _ = contains(tro.right_algebra, np.eye(4))
        assert ok
        assert tro.left_algebra.dim == 1 and tro.right_algebra.dim == 4

    def test_degenerate_column_span(self):
        with pytest.raises(Degenerate):
            mo.tro_from_space(span(unit(0, 0, 2)))

    def test_degenerate_adjoint_span(self):
        # Rows cover the codomain but the adjoint misses half the domain.
        x = orthonormalize([unit(0, 0, 1, 2)], TOL, shape=(1, 2))
        with pytest.raises(Degenerate):
            mo.tro_from_space(x)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=10, deadline=None)
    def test_generated_algebras_match(self, seed):
        # [M*M] and [MM*] coincide with the C*-algebras generated by the
        # seed products; that is what makes the construction non-degenerate.
        rng = np.random.default_rng(seed)
        dim_k, dim_h = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        mats = [
            rng.normal(size=(dim_k, dim_h)) + 1j * rng.normal(size=(dim_k, dim_h))
            for _ in range(2)
        ]
        x = orthonormalize(mats, TOL, shape=(dim_k, dim_h))
        tro = mo.tro_from_space(x)
        adj = adjoint_space(x)
        assert equals(tro.right_algebra, alg.generated_cstar(product_span(adj, x)))
        assert equals(tro.left_algebra, alg.generated_cstar(product_span(x, adj)))
        axiom = subspace_defect(
            product_span(product_span(tro.space, adjoint_space(tro.space)), tro.space),
            tro.space,
        )
        assert axiom < 1e-8


def permuted_graph_pair(g, perm):
    """S_G on D_n, its relabel under perm, and the diagonal-times-permutation TRO."""
    n = g.n
    u = np.zeros((n, n), dtype=complex)
    for i in range(n):
        u[perm[i], i] = 1.0
    relabeled = cl.Graph.make(
        n, [(min(perm[a], perm[b]), max(perm[a], perm[b])) for a, b in g.edges]
    )
    s = cl.graph_operator_system(g, TOL)
    t = cl.graph_operator_system(relabeled, TOL)
    m = mo.TroSpace.from_space(span(*(unit(i, i, n) @ u for i in range(n))))
    return s, t, m


class TestVerifyTroEquivalence:
    def test_full_matrix_pair(self):
        tro = mo.tro_from_space(rect_space(2, 3))
        rep = mo.verify_tro_equivalence(tro, full_system(3), full_system(2))
        assert rep.ok
        assert rep.failed() == ()

    def test_permutation_conjugation(self):
        s, t, m = permuted_graph_pair(SIX_A, (3, 4, 2, 0, 1, 5))
        rep = mo.verify_tro_equivalence(m, s, t)
        assert rep.ok

    def test_rank_one_fails_nondegeneracy(self):
        m = mo.TroSpace.from_space(span(unit(0, 0, 2)))
        rep = mo.verify_tro_equivalence(m, full_system(2), full_system(2))
        assert not rep.ok
        assert "nondegenerate_domain" in rep.failed()

    def test_wrong_target_system_fails(self):
        tro = mo.tro_from_space(rect_space(3, 3))
        s = full_system(3)
        t = cl.graph_operator_system(cl.Graph.make(3, [(0, 1)]), TOL)
        rep = mo.verify_tro_equivalence(tro, s, t)
        assert not rep.ok
        assert "pushes_into_codomain" in rep.failed()


class TestBalanceTro:
    def test_full_matrix_already_balanced(self):
        tro = mo.tro_from_space(rect_space(2, 3))
        balanced = mo.balance_tro(tro, full_system(3), full_system(2))
        assert equals(balanced.space, tro.space)

    def test_quotient_pair_multiplier_blocks(self):
        skel, quotient = cl.skeleton_graph(SIX_A)
        theta = cl.canonical_pullback_channel(quotient, TOL)
        s = cl.graph_operator_system(SIX_A, TOL)
        t = cl.graph_operator_system(skel, TOL)
        m = mo.tro_from_space(mo.kraus_space(theta))
        balanced = mo.balance_tro(m, s, t)
        assert equals(balanced.right_algebra, alg.multiplier_algebra(s.system))
        dec = alg.block_decomposition(balanced.right_algebra)
        assert tuple(sorted(dec.blocks)) == ((1, 1), (2, 1), (3, 1))

    def test_amplification_pair_multipliers(self):
        theta, t, s = amplification_map()
        m = mo.tro_from_space(mo.kraus_space(theta))
        balanced = mo.balance_tro(m, s, t)
        expected = span(*(np.kron(unit(i, j, 2), np.eye(2)) for i in range(2) for j in range(2)))
        assert equals(balanced.right_algebra, expected)
        assert balanced.left_algebra.dim == 1

    def test_balanced_still_implements_equivalence(self):
        s, t, m = permuted_graph_pair(SIX_A, (5, 4, 3, 2, 1, 0))
        balanced = mo.balance_tro(m, s, t)
        rep = mo.verify_tro_equivalence(balanced, s, t)
        assert rep.ok

    def test_rejects_unverified_input(self):
        m = mo.TroSpace.from_space(span(unit(0, 0, 2)))
        with pytest.raises(ValidationFailed):
            mo.balance_tro(m, full_system(2), full_system(2))

    def test_multiplicity_gate_propagates(self):
        # Scalar system over the full algebra is not multiplicity free.
        full = alg.full_matrix_algebra(2, TOL)
        scalars = alg.validate_quantum_graph(span(np.eye(2)), full)
        m = mo.TroSpace.from_space(span(np.eye(2)))
        assert mo.verify_tro_equivalence(m, scalars, scalars).ok
        with pytest.raises(NotIrreducible):
            mo.balance_tro(m, scalars, scalars)


class TestVerifyBalancedEquivalence:
    def test_full_algebra_pair_automatically_balanced(self):
        # With full algebras on both sides the algebra conditions are free.
        tro = mo.tro_from_space(rect_space(2, 3))
        rep = mo.verify_balanced_equivalence(tro, full_system(3), full_system(2))
        assert rep.ok

    def test_unitary_conjugation_of_matrix_systems(self):
        rng = np.random.default_rng(13)
        u = haar_unitary(rng, 3)
        space = span(np.eye(3), unit(0, 1, 3), unit(1, 0, 3))
        full = alg.full_matrix_algebra(3, TOL)
        s = alg.validate_quantum_graph(space, full)
        t = alg.validate_quantum_graph(
            orthonormalize([u @ x @ u.conj().T for x in space.basis], TOL), full
        )
        m = mo.TroSpace.from_space(span(u))
        rep = mo.verify_balanced_equivalence(m, s, t)
        assert rep.ok

    def test_graph_permutation_pair(self):
        s, t, m = permuted_graph_pair(SIX_A, (1, 0, 2, 5, 3, 4))
        rep = mo.verify_balanced_equivalence(m, s, t)
        assert rep.ok

    def test_system_passes_algebra_fails(self):
        # Full system over the full algebra against the full system over
        # scalars: systems are equivalent, the algebras cannot be.
        n, m_dim = 3, 2
        s = full_system(n)
        scalars = span(np.eye(m_dim))
        t = alg.validate_quantum_graph(
            span(*(unit(i, j, m_dim) for i in range(m_dim) for j in range(m_dim))), scalars
        )
        tro = mo.tro_from_space(rect_space(m_dim, n))
        rep = mo.verify_balanced_equivalence(tro, s, t)
        assert not rep.ok
        assert all(c.ok for c in rep.conditions if c.name.startswith("system_"))
        assert "algebra_pushes_into_codomain" in rep.failed()

    def test_kraus_branch_classical_isomorphism(self):
        g = cl.Graph.make(4, [(0, 1), (1, 2), (2, 3)])
        perm = (2, 0, 3, 1)
        relabeled = cl.Graph.make(
            4, [(min(perm[a], perm[b]), max(perm[a], perm[b])) for a, b in g.edges]
        )
        f = cl.VertexMap(relabeled, g, tuple(np.argsort(perm).tolist()))
        assert cl.is_pullback_map(f) == (True, True)
        theta = cl.canonical_pullback_channel(f, TOL)
        s = cl.graph_operator_system(relabeled, TOL)
        t = cl.graph_operator_system(g, TOL)
        rep = mo.verify_balanced_equivalence(theta, s, t)
        assert rep.ok

    def test_kraus_branch_amplification_drops_algebra(self):
        # The algebras across an amplification have different commutants,
        # so the balanced conditions cannot all hold.
        theta, t, s = amplification_map()
        rep = mo.verify_balanced_equivalence(theta, s, t)
        assert not rep.ok
        assert rep.residual("system_pullback") < 1e-10
        assert rep.residual("system_pushforward") < 1e-10
        assert "algebra_pullback" in rep.failed()

    def test_kraus_branch_reports_faithfulness(self):
        k3 = cl.complete_graph(3)
        target = cl.Graph.make(2, [])
        theta = cl.canonical_pullback_channel(cl.VertexMap(k3, target, (0, 0, 0)), TOL)
        rep = mo.verify_balanced_equivalence(theta, full_system(3), cl.graph_operator_system(target, TOL))
        assert "faithful" in rep.failed()
