"""Walk through the worked two-block equivalence, printing each stage.

Builds the pair of quantum graphs whose ambient algebras are M_2 + M_3
embedded in dimensions 7 and 12, reduces both, compares fingerprints, and
runs the full decision with witness verification.  Residuals are printed at
every step so the output doubles as a numerical health check.
"""

import sys

import numpy as np

from qgraph import morita, skeleton
from qgraph.linalg import Tolerance, orthonormalize
from qgraph import algebras


def unit(i, j, n, m=None):
    e = np.zeros((n, m if m is not None else n), dtype=np.complex128)
    e[i, j] = 1.0
    return e


def embed(x, r0, c0, n):
    m = np.zeros((n, n), dtype=np.complex128)
    m[r0 : r0 + x.shape[0], c0 : c0 + x.shape[1]] = x
    return m


def build_pair(tol):
    n = 7
    s_mats = [embed(np.kron(unit(i, j, 2), np.eye(2)), 0, 0, n) for i in range(2) for j in range(2)]
    for r in range(2):
        for a in range(2):
            for b in range(3):
                s_mats.append(embed(np.kron(unit(r, 0, 2, 1), unit(a, b, 2, 3)), 0, 4, n))
                s_mats.append(embed(np.kron(unit(0, r, 1, 2), unit(b, a, 3, 2)), 4, 0, n))
    s_mats.append(embed(np.eye(3), 4, 4, n))
    a_mats = [embed(np.kron(np.eye(2), unit(i, j, 2)), 0, 0, n) for i in range(2) for j in range(2)]
    a_mats += [embed(unit(i, j, 3), 4, 4, n) for i in range(3) for j in range(3)]
    source = algebras.validate_quantum_graph(
        orthonormalize(s_mats, tol, shape=(n, n)), orthonormalize(a_mats, tol, shape=(n, n))
    )

    m = 12
    t_mats = [embed(np.kron(unit(i, j, 3), np.eye(2)), 0, 0, m) for i in range(3) for j in range(3)]
    for r in range(3):
        for s_ in range(2):
            for a in range(2):
                for b in range(3):
                    t_mats.append(embed(np.kron(unit(r, s_, 3, 2), unit(a, b, 2, 3)), 0, 6, m))
                    t_mats.append(embed(np.kron(unit(s_, r, 2, 3), unit(b, a, 3, 2)), 6, 0, m))
    t_mats += [embed(np.kron(unit(i, j, 2), np.eye(3)), 6, 6, m) for i in range(2) for j in range(2)]
    b_mats = [embed(np.kron(np.eye(3), unit(i, j, 2)), 0, 0, m) for i in range(2) for j in range(2)]
    b_mats += [embed(np.kron(np.eye(2), unit(i, j, 3)), 6, 6, m) for i in range(3) for j in range(3)]
    target = algebras.validate_quantum_graph(
        orthonormalize(t_mats, tol, shape=(m, m)), orthonormalize(b_mats, tol, shape=(m, m))
    )
    return source, target


def main() -> int:
    tol = Tolerance()
    source, target = build_pair(tol)
    print(f"source: dim S = {source.space.dim} on C^{source.ambient}")
    print(f"target: dim T = {target.space.dim} on C^{target.ambient}")

    results = {}
    for name, qg in (("source", source), ("target", target)):
        res = skeleton.quantum_skeleton(qg)
        results[name] = res
        print(f"{name} reduction: blocks {res.blocks.blocks},"
              f" skeleton dim {res.skeleton_dim},"
              f" decomposition residual {res.blocks.residual:.2e}")
        grid = [[sp.dim for sp in row] for row in res.slice_blocks]
        print(f"  slice dimension grid: {grid}")

    fp = {k: skeleton.skeleton_fingerprint(v) for k, v in results.items()}
    print(f"fingerprints match: {fp['source'] == fp['target']}"
          f" (multiplicities {fp['source'].multiplicities})")

    dec = skeleton.decide_tro_equivalence(source, target)
    print(f"decision: {dec.verdict.value}")
    if dec.witness is None:
        return 1
    rep = morita.verify_tro_equivalence(dec.witness, source, target)
    print(f"witness re-verified: {rep.ok}")
    for cond in rep.conditions:
        print(f"  {cond.name}: {cond.residual:.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
