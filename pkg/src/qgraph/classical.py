"""Finite simple graphs: twins, skeletons, blow-ups, pullback maps, parameters.

The classical layer plays two roles.  It is a library in its own right
(graph operator systems, the skeleton-isomorphism decision for TRO
equivalence, exact brute-force parameters), and it is the ground truth the
quantum layer is tested against: every twin-class statement about multiplier
algebras has its counterpart here, computed from closed neighborhoods alone.

Vertices are 0..n-1.  Adjacency-or-equality is written `like` below, matching
the reflexive relation that defines graph operator systems.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BudgetExceeded, NotPullback, SizeMismatch
from . import algebras
from .linalg import Tolerance, orthonormalize

__all__ = [
    "Graph",
    "TwinPartition",
    "VertexMap",
    "canonical_pullback_channel",
    "chromatic_number",
    "clique_blowup",
    "clique_number",
    "graph_isomorphism",
    "graph_operator_system",
    "independence_number",
    "is_pullback_map",
    "path_graph",
    "complete_graph",
    "skeleton_graph",
    "tro_equivalent_graphs",
    "true_twin_classes",
]

PARAM_BUDGET_VERTICES = 30


@dataclass(frozen=True)
class Graph:
    """A finite simple graph on vertices 0..n-1."""

    n: int
    edges: frozenset[tuple[int, int]]

    @staticmethod
    def make(n: int, edges) -> "Graph":
        if n < 1:
            raise ValueError("graphs need at least one vertex")
        norm = set()
        for e in edges:
            a, b = int(e[0]), int(e[1])
            if a == b:
                raise ValueError(f"loop at vertex {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge {(a, b)} out of range for {n} vertices")
            pair = (min(a, b), max(a, b))
            if pair in norm:
                raise ValueError(f"duplicate edge {pair}")
            norm.add(pair)
        return Graph(n, frozenset(norm))

    @cached_property
    def adjacency(self) -> tuple[frozenset[int], ...]:
        adj = [set() for _ in range(self.n)]
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return tuple(frozenset(s) for s in adj)

    def adjacent(self, x: int, y: int) -> bool:
        return (min(x, y), max(x, y)) in self.edges

    def like(self, x: int, y: int) -> bool:
        """Adjacent or equal."""
        return x == y or self.adjacent(x, y)

    def closed_neighborhood(self, x: int) -> frozenset[int]:
        return self.adjacency[x] | {x}

    def complement(self) -> "Graph":
        comp = [
            (a, b)
            for a, b in itertools.combinations(range(self.n), 2)
            if (a, b) not in self.edges
        ]
        return Graph.make(self.n, comp)

    def degree_of(self, x: int) -> int:
        return len(self.adjacency[x])


def path_graph(n: int) -> Graph:
    return Graph.make(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n: int) -> Graph:
    return Graph.make(n, list(itertools.combinations(range(n), 2)))


@dataclass(frozen=True)
class VertexMap:
    """A vertex map f: V(source) -> V(target), stored as the image list."""

    source: Graph
    target: Graph
    image: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.image) != self.source.n:
            raise SizeMismatch("image length must equal the source vertex count")
        if any(not 0 <= v < self.target.n for v in self.image):
            raise ValueError("image vertex out of range")

    def __call__(self, x: int) -> int:
        return self.image[x]

    @property
    def surjective(self) -> bool:
        return len(set(self.image)) == self.target.n


@dataclass(frozen=True)
class TwinPartition:
    """Partition of the vertex set into true-twin classes."""

    classes: tuple[tuple[int, ...], ...]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.classes)

    def class_of(self, x: int) -> int:
        for i, c in enumerate(self.classes):
            if x in c:
                return i
        raise ValueError(f"vertex {x} not in partition")


def true_twin_classes(g: Graph) -> TwinPartition:
    """Group vertices by equal closed neighborhoods; classes ordered by minimum vertex."""
    groups: dict[frozenset[int], list[int]] = {}
    for v in range(g.n):
        groups.setdefault(g.closed_neighborhood(v), []).append(v)
    classes = sorted(groups.values(), key=min)
    return TwinPartition(tuple(tuple(c) for c in classes))


def skeleton_graph(g: Graph) -> tuple[Graph, VertexMap]:
    """Quotient by true-twin classes, plus the quotient map (a full pullback).

    Class i ~ class j iff their members are adjacent in g; this is
    well-defined because members of one class share closed neighborhoods.
    """
    part = true_twin_classes(g)
    reps = [c[0] for c in part.classes]
    k = len(reps)
    edges = [
        (i, j)
        for i, j in itertools.combinations(range(k), 2)
        if g.adjacent(reps[i], reps[j])
    ]
    skel = Graph.make(k, edges)
    image = tuple(part.class_of(v) for v in range(g.n))
    return skel, VertexMap(g, skel, image)


def clique_blowup(g: Graph, sizes) -> Graph:
    """Replace vertex v by a clique of sizes[v] vertices, laid out consecutively."""
    sizes = [int(s) for s in sizes]
    if len(sizes) != g.n:
        raise SizeMismatch(f"need {g.n} sizes, got {len(sizes)}")
    if any(s < 1 for s in sizes):
        raise ValueError("clique sizes must be positive")
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    edges = []
    for v in range(g.n):
        edges.extend(itertools.combinations(range(offsets[v], offsets[v + 1]), 2))
    for a, b in g.edges:
        edges.extend(
            (x, y)
            for x in range(offsets[a], offsets[a + 1])
            for y in range(offsets[b], offsets[b + 1])
        )
    return Graph.make(int(offsets[-1]), edges)


# -- isomorphism ------------------------------------------------------------

def _refine_colors(g: Graph, colors: list[int]) -> list[int]:
    # Iterative neighborhood-label refinement; stabilizes in <= n rounds.
    while True:
        sigs = [
            (colors[v], tuple(sorted(colors[w] for w in g.adjacency[v])))
            for v in range(g.n)
        ]
        relabel = {s: i for i, s in enumerate(sorted(set(sigs)))}
        new = [relabel[s] for s in sigs]
        if new == colors:
            return colors
        colors = new


def graph_isomorphism(g: Graph, h: Graph) -> VertexMap | None:
    """An isomorphism witness g -> h, or None.

    Color refinement prunes the candidate classes, then backtracking matches
    vertices class by class.  Exact at the scales skeletons have here
    (intended for n up to about 12).
    """
    if g.n != h.n or len(g.edges) != len(h.edges):
        return None
    gc = _refine_colors(g, [0] * g.n)
    hc = _refine_colors(h, [0] * h.n)
    if sorted(gc) != sorted(hc):
        return None

    order = sorted(range(g.n), key=lambda v: (gc[v], v))
    image: list[int] = [-1] * g.n
    used = [False] * h.n

    def compatible(v: int, w: int) -> bool:
        if gc[v] != hc[w]:
            return False
        for u in range(g.n):
            if image[u] >= 0:
                if g.adjacent(v, u) != h.adjacent(w, image[u]):
                    return False
        return True

    def place(idx: int) -> bool:
        if idx == g.n:
            return True
        v = order[idx]
        for w in range(h.n):
            if not used[w] and compatible(v, w):
                image[v] = w
                used[w] = True
                if place(idx + 1):
                    return True
                image[v] = -1
                used[w] = False
        return False

    if not place(0):
        return None
    return VertexMap(g, h, tuple(image))


# -- pullback maps ----------------------------------------------------------

def is_pullback_map(f: VertexMap) -> tuple[bool, bool]:
    """(is a pullback map, is full).

    Pullback: x ~ y in the source iff f(x) ~ f(y) in the target, over all
    vertex pairs, with ~ meaning adjacent-or-equal.  Full means surjective.
    """
    g, h = f.source, f.target
    for x in range(g.n):
        for y in range(x, g.n):
            if g.like(x, y) != h.like(f(x), f(y)):
                return False, f.surjective
    return True, f.surjective


def graph_operator_system(g: Graph, tol: Tolerance | None = None) -> "algebras.QuantumGraph":
    """The span of matrix units over adjacent-or-equal pairs, on the diagonal algebra."""
    tol = tol if tol is not None else Tolerance()
    n = g.n
    mats = []
    for x in range(n):
        for y in range(n):
            if g.like(x, y):
                m = np.zeros((n, n), dtype=complex)
                m[x, y] = 1.0
                mats.append(m)
    system = orthonormalize(mats, tol, shape=(n, n))
    diag = orthonormalize(
        [np.diag(np.eye(n, dtype=complex)[i]) for i in range(n)], tol, shape=(n, n)
    )
    return algebras.validate_quantum_graph(system, diag)


def canonical_pullback_channel(f: VertexMap, tol: Tolerance | None = None):
    """The unital *-homomorphism between diagonal algebras induced by a pullback map.

    Kraus operators are the matrix units e_{f(i), i}; the resulting map sends
    a diagonal matrix b to diag(b[f(0)], ..., b[f(n-1)]).
    """
    ok, _ = is_pullback_map(f)
    if not ok:
        raise NotPullback("vertex map does not preserve adjacent-or-equal both ways")
    from .morita import KrausMap  # deferred: morita imports this module's types
    tol = tol if tol is not None else Tolerance()
    n_src, n_tgt = f.source.n, f.target.n
    kraus = []
    for i in range(n_src):
        v = np.zeros((n_tgt, n_src), dtype=complex)
        v[f(i), i] = 1.0
        kraus.append(v)
    domain = orthonormalize(
        [np.diag(np.eye(n_tgt, dtype=complex)[i]) for i in range(n_tgt)], tol, shape=(n_tgt, n_tgt)
    )
    codomain = orthonormalize(
        [np.diag(np.eye(n_src, dtype=complex)[i]) for i in range(n_src)], tol, shape=(n_src, n_src)
    )
    return KrausMap(dim_h=n_src, dim_k=n_tgt, kraus=kraus,
                    domain_algebra=domain, codomain_algebra=codomain)


# -- exact parameters -------------------------------------------------------

def _check_budget(g: Graph) -> None:
    if g.n > PARAM_BUDGET_VERTICES:
        raise BudgetExceeded(
            f"exact parameters are contracted up to {PARAM_BUDGET_VERTICES} vertices, got {g.n}"
        )


def independence_number(g: Graph) -> int:
    """Maximum independent set size by branch and bound."""
    _check_budget(g)
    adj = g.adjacency
    best = 0

    def greedy_bound(cand: set[int]) -> int:
        # Color-count bound: vertices packed greedily into cliques.
        bound = 0
        remaining = set(cand)
        while remaining:
            v = remaining.pop()
            clique = {v}
            for w in list(remaining):
                if all(u in adj[w] for u in clique):
                    clique.add(w)
                    remaining.remove(w)
            bound += 1
        return bound

    def expand(current: int, cand: set[int]) -> None:
        nonlocal best
        if current + len(cand) <= best:
            return
        if not cand:
            best = max(best, current)
            return
        if current + greedy_bound(cand) <= best:
            return
        v = max(cand, key=lambda u: len(adj[u] & cand))
        # Branch: exclude v, then include it.
        expand(current, cand - {v})
        expand(current + 1, cand - adj[v] - {v})

    expand(0, set(range(g.n)))
    return best


def clique_number(g: Graph) -> int:
    return independence_number(g.complement())


def chromatic_number(g: Graph) -> int:
    """Exact chromatic number: iterative deepening with clique lower bound."""
    _check_budget(g)
    if not g.edges:
        return 1 if g.n >= 0 else 0
    lower = clique_number(g)
    order = sorted(range(g.n), key=g.degree_of, reverse=True)

    def colorable(k: int) -> bool:
        colors = [-1] * g.n

        def place(idx: int) -> bool:
            if idx == g.n:
                return True
            v = order[idx]
            seen = {colors[w] for w in g.adjacency[v] if colors[w] >= 0}
            used_count = len({colors[order[i]] for i in range(idx)})
            for c in range(min(k, used_count + 1)):
                if c not in seen:
                    colors[v] = c
                    if place(idx + 1):
                        return True
                    colors[v] = -1
            return False

        return place(0)

    k = lower
    while not colorable(k):
        k += 1
    return k


# -- classical TRO-equivalence decision -------------------------------------

@dataclass(frozen=True)
class ClassicalEquivalenceWitness:
    quotient_source: VertexMap
    quotient_target: VertexMap
    skeleton_isomorphism: VertexMap


def tro_equivalent_graphs(g: Graph, h: Graph) -> tuple[bool, ClassicalEquivalenceWitness | None]:
    """Decide TRO-equivalence of the two graph operator systems.

    Holds iff the true-twin skeletons are isomorphic; the witness packages
    both quotient maps and the skeleton isomorphism.
    """
    gs, gq = skeleton_graph(g)
    hs, hq = skeleton_graph(h)
    iso = graph_isomorphism(gs, hs)
    if iso is None:
        return False, None
    return True, ClassicalEquivalenceWitness(gq, hq, iso)
