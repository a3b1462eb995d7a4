"""Skeleton reduction, invariant fingerprints, and the equivalence decision."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import _systems
from _systems import TOL, full_system, graph_system, haar_unitary, span, unit
from qgraph import algebras as al
from qgraph import classical as cl
from qgraph import skeleton as sk
from qgraph.errors import NotIrreducible, StructureMismatch
from qgraph.linalg import equals, orthonormalize
from qgraph.morita import PullbackVerdict, TroSpace, is_pullback_homomorphism

SIX_A = cl.Graph.make(
    6, [(0, 1), (0, 2), (1, 2), (2, 3), (2, 4), (2, 5), (3, 4), (3, 5), (4, 5)]
)
FIVE_B = cl.Graph.make(5, [(0, 1), (0, 2), (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)])
PAIR_EDGES = cl.Graph.make(4, [(0, 1), (2, 3)])
PAW_PLUS = cl.Graph.make(4, [(0, 1), (0, 2), (0, 3), (2, 3)])

# Cubic six-vertex pair with identical degree refinements but different
# triangle structure; separating them needs the canonical grids.
BIPARTITE_CUBIC = cl.Graph.make(6, [(0, 3), (0, 4), (0, 5), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5)])
PRISM = cl.Graph.make(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (0, 3), (1, 4), (2, 5)])


@pytest.fixture(scope="module")
def two_layer():
    s = _systems.two_layer_source()
    t = _systems.two_layer_target()
    return s, t, sk.quantum_skeleton(s), sk.quantum_skeleton(t)


def graph_strategy(max_n=5):
    def build(draw):
        n = draw(st.integers(min_value=2, max_value=max_n))
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        mask = draw(st.tuples(*(st.booleans() for _ in pairs)))
        return cl.Graph.make(n, [e for e, keep in zip(pairs, mask) if keep])

    return st.composite(build)()


class TestQuantumSkeleton:
    def test_full_matrix_algebra_reduces_to_point(self):
        res = sk.quantum_skeleton(full_system(4))
        assert res.blocks.blocks == ((4, 1),)
        assert res.skeleton_dim == 1
        assert res.reduced_system.dim == 1
        assert res.reduced_algebra.dim == 1
        res.reduced_quantum_graph()

    def test_graph_system_blocks_match_twin_classes(self):
        res = sk.quantum_skeleton(graph_system(SIX_A))
        # Twin classes have sizes 1, 2, 3 and every multiplicity layer is a line.
        assert res.blocks.blocks == ((1, 1), (2, 1), (3, 1))
        reduced = sk._as_graph(res)
        expected, _ = cl.skeleton_graph(SIX_A)
        assert cl.graph_isomorphism(reduced, expected) is not None

    def test_reduced_graph_system_is_its_own_skeleton(self):
        # Twin-free, so the reduction only relabels vertices.
        star = cl.Graph.make(3, [(0, 1), (0, 2)])
        res = sk.quantum_skeleton(graph_system(star))
        assert res.blocks.blocks == ((1, 1), (1, 1), (1, 1))
        assert res.reduced_system.dim == graph_system(star).space.dim
        assert cl.graph_isomorphism(sk._as_graph(res), star) is not None

    def test_two_layer_source_reduction(self, two_layer):
        s, _, res, _ = two_layer
        assert s.space.dim == 29
        assert res.blocks.blocks == ((2, 2), (1, 3))
        assert res.skeleton_dim == 5
        assert [[b.dim for b in row] for row in res.slice_blocks] == [[1, 6], [6, 1]]
        # Scalar diagonal layers, full corners.
        expected = [_systems._embedded(np.eye(2), 0, 0, 5), _systems._embedded(np.eye(3), 2, 2, 5)]
        expected += [
            _systems._embedded(unit(a, b, 2, 3), 0, 2, 5) for a in range(2) for b in range(3)
        ]
        expected += [
            _systems._embedded(unit(b, a, 3, 2), 2, 0, 5) for a in range(2) for b in range(3)
        ]
        assert equals(res.reduced_system, span(*expected))

    def test_two_layer_pair_shares_reduction(self, two_layer):
        _, t, res_s, res_t = two_layer
        assert t.space.dim == 85
        assert res_t.blocks.blocks == ((3, 2), (2, 3))
        assert equals(res_s.reduced_system, res_t.reduced_system)
        assert equals(res_s.reduced_algebra, res_t.reduced_algebra)

    def test_kraus_sum_identities(self, two_layer):
        _, _, res, _ = two_layer
        theta = res.canonical_pullback
        total = sum(v.conj().T @ v for v in theta.kraus)
        assert np.allclose(total, np.eye(theta.dim_h), atol=1e-10)
        # Per layer: the kraus family restricted to layer i resolves alpha_i
        # times the projection onto that layer of the reduced space.
        start = 0
        loff = 0
        for alpha, n in res.blocks.blocks:
            ops = theta.kraus[start : start + alpha]
            proj = np.zeros((theta.dim_k, theta.dim_k), dtype=complex)
            proj[loff : loff + n, loff : loff + n] = np.eye(n)
            assert np.allclose(sum(v @ v.conj().T for v in ops), alpha * proj, atol=1e-10)
            start += alpha
            loff += n

    def test_kraus_cross_products_are_layer_scalars(self, two_layer):
        _, _, res, _ = two_layer
        kraus = res.canonical_pullback.kraus
        layer = []
        for i, alpha in enumerate(res.blocks.alphas):
            layer.extend([i] * alpha)
        loffs = np.concatenate([[0], np.cumsum(res.blocks.multiplicities)])
        for p, v in enumerate(kraus):
            for q, w in enumerate(kraus):
                prod = v @ w.conj().T
                if p == q:
                    i = layer[p]
                    expected = np.zeros_like(prod)
                    expected[loffs[i] : loffs[i + 1], loffs[i] : loffs[i + 1]] = np.eye(
                        res.blocks.multiplicities[i]
                    )
                    assert np.allclose(prod, expected, atol=1e-10)
                else:
                    assert np.allclose(prod, 0, atol=1e-10)

    def test_canonical_pullback_is_full(self):
        s = graph_system(SIX_A)
        res = sk.quantum_skeleton(s)
        verdict = is_pullback_homomorphism(
            res.canonical_pullback, res.reduced_quantum_graph(), s
        )
        assert verdict is PullbackVerdict.FULL_PULLBACK

    def test_not_multiplicity_free_raises(self):
        full = [unit(i, j, 2) for i in range(2) for j in range(2)]
        scalars = al.validate_quantum_graph(span(np.eye(2)), span(*full))
        with pytest.raises(NotIrreducible):
            sk.quantum_skeleton(scalars)

    @settings(max_examples=12, deadline=None)
    @given(graph_strategy())
    def test_graph_reduction_matches_twin_quotient(self, g):
        res = sk.quantum_skeleton(graph_system(g))
        reduced = sk._as_graph(res)
        assert reduced is not None
        expected, _ = cl.skeleton_graph(g)
        assert cl.graph_isomorphism(reduced, expected) is not None


class TestSliceIndependence:
    def test_product_block_passes(self):
        rng = np.random.default_rng(3)
        ys = [rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3)) for _ in range(2)]
        mats = [np.kron(unit(r, s, 2, 2), y) for r in range(2) for s in range(2) for y in ys]
        rep = sk.slice_independence_check(span(*mats), 2, 2, trials=8)
        assert rep.ok
        assert len(rep.conditions) == 8

    def test_full_block_passes(self):
        mats = [unit(i, j, 4, 6) for i in range(4) for j in range(6)]
        assert sk.slice_independence_check(span(*mats), 2, 2).ok

    def test_zero_block_passes(self):
        empty = orthonormalize([], TOL, shape=(4, 6))
        assert sk.slice_independence_check(empty, 2, 2, trials=3).ok

    def test_unbalanced_block_fails(self):
        rng = np.random.default_rng(5)
        y1 = rng.normal(size=(1, 3)) + 1j * rng.normal(size=(1, 3))
        y2 = rng.normal(size=(1, 3)) + 1j * rng.normal(size=(1, 3))
        mixed = span(np.kron(unit(0, 0, 2, 2), y1) + np.kron(unit(0, 1, 2, 2), y2))
        rep = sk.slice_independence_check(mixed, 2, 2, trials=6)
        assert not rep.ok

    def test_shape_mismatch_raises(self):
        with pytest.raises(StructureMismatch):
            sk.slice_independence_check(span(unit(0, 0, 3, 4)), 2, 2)

    def test_extracted_blocks_pass(self, two_layer):
        s, _, res, _ = two_layer
        w = res.blocks.unitary
        offs = res.blocks.offsets
        rotated = [w @ x @ w.conj().T for x in s.space.basis]
        for i in range(2):
            for j in range(2):
                pieces = [x[offs[i] : offs[i + 1], offs[j] : offs[j + 1]] for x in rotated]
                block = orthonormalize(
                    pieces, TOL, shape=(offs[i + 1] - offs[i], offs[j + 1] - offs[j])
                )
                alpha_i, alpha_j = res.blocks.alphas[i], res.blocks.alphas[j]
                assert sk.slice_independence_check(block, alpha_i, alpha_j, trials=5).ok


class TestFingerprint:
    def test_twin_blowups_share_fingerprint(self):
        fp_a = sk.skeleton_fingerprint(sk.quantum_skeleton(graph_system(SIX_A)))
        fp_b = sk.skeleton_fingerprint(sk.quantum_skeleton(graph_system(FIVE_B)))
        assert fp_a == fp_b
        assert fp_a.exact

    def test_block_count_separates(self):
        fp_a = sk.skeleton_fingerprint(sk.quantum_skeleton(graph_system(PAIR_EDGES)))
        fp_b = sk.skeleton_fingerprint(sk.quantum_skeleton(graph_system(PAW_PLUS)))
        assert sk._fingerprint_mismatch(fp_a, fp_b) == "block_count"

    def test_degree_profile_separates(self):
        path = cl.Graph.make(3, [(0, 1), (1, 2)])
        empty = cl.Graph.make(3, [])
        fp_a = sk.skeleton_fingerprint(sk.quantum_skeleton(graph_system(path)))
        fp_b = sk.skeleton_fingerprint(sk.quantum_skeleton(graph_system(empty)))
        assert sk._fingerprint_mismatch(fp_a, fp_b) == "profile"

    def test_canonical_grid_separates_cubic_pair(self):
        # Degree refinement alone cannot split these; the enumerated grids do.
        fp_a = sk.skeleton_fingerprint(sk.quantum_skeleton(graph_system(BIPARTITE_CUBIC)))
        fp_b = sk.skeleton_fingerprint(sk.quantum_skeleton(graph_system(PRISM)))
        assert fp_a.profile == fp_b.profile
        assert sk._fingerprint_mismatch(fp_a, fp_b) == "dim_grid"

    def test_amplification_sizes_are_ignored(self, two_layer):
        _, _, res_s, res_t = two_layer
        assert res_s.blocks.alphas != res_t.blocks.alphas
        assert sk.skeleton_fingerprint(res_s) == sk.skeleton_fingerprint(res_t)

    @pytest.mark.parametrize("seed", [0, 1])
    def test_conjugation_invariance(self, seed, two_layer):
        s, _, res_s, _ = two_layer
        u = haar_unitary(np.random.default_rng(seed), 7)
        moved = al.validate_quantum_graph(
            span(*[u @ x @ u.conj().T for x in s.space.basis]),
            span(*[u @ x @ u.conj().T for x in s.algebra.basis]),
        )
        fp = sk.skeleton_fingerprint(sk.quantum_skeleton(moved))
        assert fp == sk.skeleton_fingerprint(res_s)

    def test_deterministic(self):
        g = graph_system(FIVE_B)
        fp_1 = sk.skeleton_fingerprint(sk.quantum_skeleton(g))
        fp_2 = sk.skeleton_fingerprint(sk.quantum_skeleton(g))
        assert fp_1 == fp_2
        assert fp_1.digest == fp_2.digest


def fix_phase(u):
    col = u[:, 0]
    pivot = col[np.abs(col) > 1e-6][0]
    return u * (abs(pivot) / pivot)


class TestUnitaryExtraction:
    @pytest.mark.parametrize("seed,beta,alpha,n", [(0, 2, 2, 3), (1, 1, 3, 2), (2, 3, 1, 4)])
    def test_recovers_unitary_factor(self, seed, beta, alpha, n):
        u_true = haar_unitary(np.random.default_rng(seed), n)
        mats = [np.kron(unit(r, s, beta, alpha), u_true) for r in range(beta) for s in range(alpha)]
        tro = TroSpace.from_space(span(*mats))
        u_rec = sk.tro_between_amplified_factors(tro)
        assert np.max(np.abs(u_rec - fix_phase(u_true))) < 1e-8

    def test_identity_factor(self):
        mats = [np.kron(unit(r, s, 2, 3), np.eye(2)) for r in range(2) for s in range(3)]
        u_rec = sk.tro_between_amplified_factors(TroSpace.from_space(span(*mats)))
        assert np.allclose(u_rec, np.eye(2), atol=1e-10)

    def test_single_unitary(self):
        u_true = haar_unitary(np.random.default_rng(7), 3)
        u_rec = sk.tro_between_amplified_factors(TroSpace.from_space(span(u_true)))
        assert np.max(np.abs(u_rec - fix_phase(u_true))) < 1e-8

    def test_diagonal_product_algebra_rejected(self):
        tro = TroSpace.from_space(span(unit(0, 0, 2), unit(1, 1, 2)))
        with pytest.raises(StructureMismatch):
            sk.tro_between_amplified_factors(tro)

    def test_blockwise_factors_rejected(self):
        u1 = haar_unitary(np.random.default_rng(0), 2)
        u2 = haar_unitary(np.random.default_rng(1), 2)
        tro = TroSpace.from_space(span(np.kron(unit(0, 0, 2), u1), np.kron(unit(1, 1, 2), u2)))
        with pytest.raises(StructureMismatch):
            sk.tro_between_amplified_factors(tro)

    def test_rank_two_common_factor_rejected(self):
        # Hand the extractor a claimed TRO whose matricization has rank two;
        # the algebra models match, so only the residual check can object.
        u1 = haar_unitary(np.random.default_rng(2), 2)
        u2 = haar_unitary(np.random.default_rng(3), 2)
        mats = [np.kron(unit(r, s, 2, 2), u) for r in range(2) for s in range(2) for u in (u1, u2)]
        model = span(*[np.kron(unit(i, j, 2), np.eye(2)) for i in range(2) for j in range(2)])
        tro = TroSpace(span(*mats), model, model)
        with pytest.raises(StructureMismatch):
            sk.tro_between_amplified_factors(tro)


class TestAlignmentObjective:
    def test_gradient_matches_finite_differences(self, two_layer):
        _, _, res_s, res_t = two_layer
        func, _, n_params = sk._alignment_objective(res_s, res_t, (0, 1))
        rng = np.random.default_rng(11)
        for x0 in (np.zeros(n_params), rng.normal(scale=0.5, size=n_params)):
            _, grad = func(x0)
            h = 1e-6
            for k in range(0, n_params, 3):
                e = np.zeros(n_params)
                e[k] = h
                numeric = (func(x0 + e)[0] - func(x0 - e)[0]) / (2 * h)
                assert abs(numeric - grad[k]) < 1e-5 * max(1.0, abs(numeric))

    def test_identity_aligns_identical_reductions(self):
        res_1 = sk.quantum_skeleton(_systems.exchange_system())
        res_2 = sk.quantum_skeleton(_systems.exchange_system())
        func, unitary_of, n_params = sk._alignment_objective(res_1, res_2, (0,))
        f0, _ = func(np.zeros(n_params))
        assert f0 < 1e-20
        assert np.allclose(unitary_of(np.zeros(n_params)), np.eye(2))


class TestDecide:
    def test_twin_blowups_equivalent(self):
        dec = sk.decide_tro_equivalence(graph_system(SIX_A), graph_system(FIVE_B))
        assert dec.verdict is sk.TroVerdict.EQUIVALENT
        assert dec.witness is not None
        assert dec.report is not None and dec.report.ok
        assert dec.witness.space.shape == (5, 6)

    def test_distinct_skeleton_sizes_not_equivalent(self):
        dec = sk.decide_tro_equivalence(graph_system(PAIR_EDGES), graph_system(PAW_PLUS))
        assert dec.verdict is sk.TroVerdict.NOT_EQUIVALENT
        assert "fingerprint" in dec.reason
        assert dec.witness is None

    def test_cubic_pair_not_equivalent(self):
        dec = sk.decide_tro_equivalence(graph_system(BIPARTITE_CUBIC), graph_system(PRISM))
        assert dec.verdict is sk.TroVerdict.NOT_EQUIVALENT

    def test_two_layer_pair_equivalent(self, two_layer):
        s, t, _, _ = two_layer
        dec = sk.decide_tro_equivalence(s, t)
        assert dec.verdict is sk.TroVerdict.EQUIVALENT
        assert dec.report.ok
        assert dec.witness.space.shape == (12, 7)

    def test_amplification_equivalent(self):
        dec = sk.decide_tro_equivalence(_systems.exchange_system(), _systems.amplified_exchange())
        assert dec.verdict is sk.TroVerdict.EQUIVALENT
        assert dec.report.ok

    def test_full_matrix_systems_equivalent(self):
        dec = sk.decide_tro_equivalence(full_system(3), full_system(5))
        assert dec.verdict is sk.TroVerdict.EQUIVALENT

    def test_same_system_equivalent(self):
        g = graph_system(SIX_A)
        dec = sk.decide_tro_equivalence(g, g)
        assert dec.verdict is sk.TroVerdict.EQUIVALENT

    def test_budget_exhaustion_undecided(self):
        dec = sk.decide_tro_equivalence(
            _systems.exchange_system(),
            _systems.amplified_exchange(),
            budget=sk.SearchBudget(restarts=1, iters=1),
        )
        assert dec.verdict is sk.TroVerdict.UNDECIDED
        assert dec.witness is None
        assert dec.reason is not None

    def test_not_multiplicity_free_propagates(self):
        full = [unit(i, j, 2) for i in range(2) for j in range(2)]
        scalars = al.validate_quantum_graph(span(np.eye(2)), span(*full))
        with pytest.raises(NotIrreducible):
            sk.decide_tro_equivalence(scalars, full_system(2))

    def test_search_is_deterministic(self):
        a, b = _systems.exchange_system(), _systems.amplified_exchange()
        dec_1 = sk.decide_tro_equivalence(a, b, seed=4)
        dec_2 = sk.decide_tro_equivalence(a, b, seed=4)
        assert dec_1.verdict is dec_2.verdict
        assert np.allclose(
            np.stack(dec_1.witness.space.basis), np.stack(dec_2.witness.space.basis)
        )

    @settings(max_examples=10, deadline=None)
    @given(graph_strategy(max_n=4), graph_strategy(max_n=4))
    def test_matches_classical_criterion(self, g, h):
        dec = sk.decide_tro_equivalence(graph_system(g), graph_system(h))
        assert dec.verdict is not sk.TroVerdict.UNDECIDED
        classically, _ = cl.tro_equivalent_graphs(g, h)
        expected = sk.TroVerdict.EQUIVALENT if classically else sk.TroVerdict.NOT_EQUIVALENT
        assert dec.verdict is expected
