"""Compare two graphs end to end: twins, skeletons, fingerprints, decision.

Usage:
    python3 scripts/compare_graphs.py "6:01,02,12,23,24,25,34,35,45" "5:01,02,12,13,14,23,24,34"

Each graph is "n:xy,xy,..." with single-digit vertex labels, or a path to a
graph JSON file as the CLI writes them.
"""

import argparse
import json
import sys

from qgraph import classical, skeleton
from qgraph.linalg import Tolerance


def parse_graph(arg: str) -> classical.Graph:
    if ":" not in arg:
        with open(arg) as fh:
            obj = json.load(fh)
        return classical.Graph.make(obj["n"], [tuple(e) for e in obj["edges"]])
    head, _, tail = arg.partition(":")
    edges = [(int(e[0]), int(e[1])) for e in tail.split(",") if e]
    return classical.Graph.make(int(head), edges)


def describe(name: str, g: classical.Graph) -> None:
    twins = classical.true_twin_classes(g)
    reduced, _ = classical.skeleton_graph(g)
    print(f"{name}: {g.n} vertices, {len(g.edges)} edges")
    print(f"  twin classes: {twins.classes} (sizes {twins.sizes})")
    print(f"  skeleton: {reduced.n} vertices, edges {sorted(reduced.edges)}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("first")
    parser.add_argument("second")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    g, h = parse_graph(args.first), parse_graph(args.second)
    describe("G", g)
    describe("H", h)

    ok, witness = classical.tro_equivalent_graphs(g, h)
    print(f"classical route: {'equivalent' if ok else 'not equivalent'}")
    if witness is not None:
        print(f"  skeleton isomorphism image: {witness.skeleton_isomorphism.image}")

    tol = Tolerance()
    s = classical.graph_operator_system(g, tol)
    t = classical.graph_operator_system(h, tol)
    fp_s = skeleton.skeleton_fingerprint(skeleton.quantum_skeleton(s, seed=args.seed))
    fp_t = skeleton.skeleton_fingerprint(skeleton.quantum_skeleton(t, seed=args.seed))
    print(f"fingerprints: {fp_s.digest[:16]} vs {fp_t.digest[:16]}"
          f" ({'match' if fp_s == fp_t else 'differ'})")

    dec = skeleton.decide_tro_equivalence(s, t, seed=args.seed)
    print(f"operator route: {dec.verdict.value}")
    if dec.reason:
        print(f"  reason: {dec.reason}")
    if dec.witness is not None:
        rows, cols = dec.witness.space.shape
        print(f"  witness TRO: dim {dec.witness.space.dim} in {rows}x{cols}")
    return 0 if dec.verdict is skeleton.TroVerdict.EQUIVALENT else 1


if __name__ == "__main__":
    sys.exit(main())
