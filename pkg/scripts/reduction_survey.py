"""Survey quantum reductions over random graphs.

Samples random graphs, reduces each through the operator route, and checks
the block sizes against the twin classes while tallying how often each
skeleton order shows up.  A quick way to convince yourself the reduction
machinery holds up beyond the fixed test corpus.
"""

import argparse
import collections
import sys
import time

import numpy as np

from qgraph import classical, skeleton
from qgraph.linalg import Tolerance


def random_graph(rng, n: int) -> classical.Graph:
    p = rng.uniform(0.15, 0.85)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return classical.Graph.make(n, edges)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=40)
    parser.add_argument("--max-n", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    tol = Tolerance()
    orders = collections.Counter()
    worst = 0.0
    t0 = time.monotonic()
    for i in range(args.samples):
        g = random_graph(rng, int(rng.integers(2, args.max_n + 1)))
        res = skeleton.quantum_skeleton(classical.graph_operator_system(g, tol))
        twins = classical.true_twin_classes(g)
        if sorted(res.blocks.alphas) != sorted(twins.sizes):
            print(f"MISMATCH on {g}: blocks {res.blocks.blocks} vs twins {twins.sizes}")
            return 1
        orders[res.skeleton_dim] += 1
        worst = max(worst, res.blocks.residual)
    elapsed = time.monotonic() - t0

    print(f"{args.samples} graphs in {elapsed:.1f}s, worst residual {worst:.2e}")
    print("skeleton order distribution:")
    for order in sorted(orders):
        bar = "#" * orders[order]
        print(f"  {order:2d}: {orders[order]:3d} {bar}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
