"""Command-line front end: object files, pipeline subcommands, and reports.

Every object travels as JSON with a top-level "kind" field; complex scalars
are two-element [re, im] arrays, and subspace-like kinds store spanning lists
that are orthonormalized on load.  Reports echo the tolerances and seed, put
one residual per verified condition, and are byte-identical across runs with
the same seed and inputs except for wall_time_ms.  Exit codes: 0 pass or
equivalent, 1 fail or not-equivalent, 2 parse or input-validation error,
3 undecided or out of budget.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
import time
from collections.abc import Callable, Sequence

import numpy as np

from . import algebras, classical, morita, skeleton
from .errors import (
    BudgetExceeded,
    Degenerate,
    NotUnitalAlgebra,
    ParseError,
    QGraphError,
    ValidationFailed,
)
from .linalg import MatSubspace, Tolerance, equals, orthonormalize, subspace_defect

FILE_KINDS = ("graph", "subspace", "operator_system", "quantum_graph", "kraus", "tro")

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_PARSE = 2
EXIT_UNDECIDED = 3


# --- serialization -----------------------------------------------------------

def _encode_scalar(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _encode_matrix(m: np.ndarray) -> list:
    return [[_encode_scalar(z) for z in row] for row in np.atleast_2d(m)]


def _decode_scalar(v, what: str) -> complex:
    if (
        not isinstance(v, (list, tuple))
        or len(v) != 2
        or not all(isinstance(x, (int, float)) for x in v)
    ):
        raise ParseError(f"{what}: complex scalars must be [re, im] pairs, got {v!r}")
    return complex(v[0], v[1])


def _decode_matrix(v, what: str) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(row, list) for row in v):
        raise ParseError(f"{what}: expected a non-empty list of rows")
    width = len(v[0])
    if width == 0 or any(len(row) != width for row in v):
        raise ParseError(f"{what}: rows must be non-empty and of equal length")
    return np.array(
        [[_decode_scalar(z, what) for z in row] for row in v], dtype=np.complex128
    )


def _decode_matrix_list(v, what: str, shape=None) -> list[np.ndarray]:
    if not isinstance(v, list):
        raise ParseError(f"{what}: expected a list of matrices")
    mats = [_decode_matrix(m, f"{what}[{i}]") for i, m in enumerate(v)]
    for i, m in enumerate(mats):
        if shape is not None and m.shape != shape:
            raise ParseError(f"{what}[{i}]: shape {m.shape} does not match {shape}")
        if mats and m.shape != mats[0].shape:
            raise ParseError(f"{what}: matrices disagree in shape")
    return mats


def _int_field(obj: dict, key: str, what: str) -> int:
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
        raise ParseError(f"{what}: field {key!r} must be a positive integer")
    return v


def read_object(path: str) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(obj, dict) or obj.get("kind") not in FILE_KINDS:
        raise ParseError(f"{path}: missing or unknown kind (expected one of {FILE_KINDS})")
    return obj


def load_graph(obj: dict) -> classical.Graph:
    n = _int_field(obj, "n", "graph")
    edges = obj.get("edges")
    if not isinstance(edges, list):
        raise ParseError("graph: field 'edges' must be a list of pairs")
    pairs = []
    for e in edges:
        if not isinstance(e, list) or len(e) != 2 or not all(isinstance(x, int) for x in e):
            raise ParseError(f"graph: bad edge entry {e!r}")
        pairs.append((e[0], e[1]))
    try:
        return classical.Graph.make(n, pairs)
    except ValueError as exc:
        raise ParseError(f"graph: {exc}") from exc


def load_subspace(obj: dict, tol: Tolerance) -> MatSubspace:
    shape = obj.get("shape")
    if (
        not isinstance(shape, list)
        or len(shape) != 2
        or not all(isinstance(x, int) and x > 0 for x in shape)
    ):
        raise ParseError("subspace: field 'shape' must be [rows, cols]")
    rows, cols = shape
    mats = _decode_matrix_list(obj.get("basis", []), "subspace basis", shape=(rows, cols))
    return orthonormalize(mats, tol, shape=(rows, cols))


def _load_square_family(obj: dict, key: str, dim: int, what: str, tol: Tolerance) -> MatSubspace:
    mats = _decode_matrix_list(obj.get(key), f"{what} {key}", shape=(dim, dim))
    return orthonormalize(mats, tol, shape=(dim, dim))


def load_operator_system_space(obj: dict, tol: Tolerance) -> MatSubspace:
    dim = _int_field(obj, "dim", "operator_system")
    return _load_square_family(obj, "basis", dim, "operator_system", tol)


def load_quantum_graph_spaces(obj: dict, tol: Tolerance) -> tuple[MatSubspace, MatSubspace]:
    dim = _int_field(obj, "dim", "quantum_graph")
    system = _load_square_family(obj, "system", dim, "quantum_graph", tol)
    algebra = _load_square_family(obj, "algebra", dim, "quantum_graph", tol)
    return system, algebra


def load_kraus(obj: dict, tol: Tolerance) -> morita.KrausMap:
    dim_h = _int_field(obj, "dim_h", "kraus")
    dim_k = _int_field(obj, "dim_k", "kraus")
    ops = _decode_matrix_list(obj.get("kraus"), "kraus operators", shape=(dim_k, dim_h))
    domain = _load_square_family(obj, "domain_algebra", dim_k, "kraus", tol)
    codomain = _load_square_family(obj, "codomain_algebra", dim_h, "kraus", tol)
    try:
        return morita.KrausMap(dim_h, dim_k, tuple(ops), domain, codomain)
    except (QGraphError, ValueError) as exc:
        raise ParseError(f"kraus: {exc}") from exc


def load_tro_space(obj: dict, tol: Tolerance) -> MatSubspace:
    shape = obj.get("shape")
    if (
        not isinstance(shape, list)
        or len(shape) != 2
        or not all(isinstance(x, int) and x > 0 for x in shape)
    ):
        raise ParseError("tro: field 'shape' must be [rows, cols]")
    rows, cols = shape
    mats = _decode_matrix_list(obj.get("space"), "tro space", shape=(rows, cols))
    return orthonormalize(mats, tol, shape=(rows, cols))


def graph_object(g: classical.Graph) -> dict:
    return {"kind": "graph", "n": g.n, "edges": [list(e) for e in sorted(g.edges)]}


def subspace_object(space: MatSubspace) -> dict:
    return {
        "kind": "subspace",
        "shape": [space.dim_k, space.dim_h],
        "basis": [_encode_matrix(m) for m in space.basis],
    }


def operator_system_object(space: MatSubspace) -> dict:
    return {
        "kind": "operator_system",
        "dim": space.dim_h,
        "basis": [_encode_matrix(m) for m in space.basis],
    }


def quantum_graph_object(system: MatSubspace, algebra: MatSubspace) -> dict:
    return {
        "kind": "quantum_graph",
        "dim": system.dim_h,
        "system": [_encode_matrix(m) for m in system.basis],
        "algebra": [_encode_matrix(m) for m in algebra.basis],
    }


def kraus_object(phi: morita.KrausMap) -> dict:
    return {
        "kind": "kraus",
        "dim_h": phi.dim_h,
        "dim_k": phi.dim_k,
        "kraus": [_encode_matrix(v) for v in phi.kraus],
        "domain_algebra": [_encode_matrix(m) for m in phi.domain_algebra.basis],
        "codomain_algebra": [_encode_matrix(m) for m in phi.codomain_algebra.basis],
    }


def tro_object(m: morita.TroSpace) -> dict:
    return {
        "kind": "tro",
        "shape": [m.space.dim_k, m.space.dim_h],
        "space": [_encode_matrix(x) for x in m.space.basis],
    }


def write_object(obj: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- report plumbing ---------------------------------------------------------

def _tolerance(args) -> Tolerance:
    return Tolerance(rank_eps=args.tol_rank, member_eps=args.tol_member)


def _report(args, command, verdict, residuals, witness, t0) -> dict:
    return {
        "command": command,
        "verdict": verdict,
        "residuals": {k: float(v) for k, v in residuals.items()},
        "witness": witness,
        "tolerances": {"rank_eps": args.tol_rank, "member_eps": args.tol_member},
        "seed": args.seed,
        "wall_time_ms": round((time.monotonic() - t0) * 1000.0, 3),
    }


def _emit(report: dict, args, stream=None) -> None:
    out = stream if stream is not None else sys.stdout
    if args.format == "json":
        out.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
        return
    lines = [f"command: {report['command']}", f"verdict: {report['verdict']}"]
    if report["residuals"]:
        lines.append("residuals:")
        lines.extend(f"  {k}: {v:.6e}" for k, v in sorted(report["residuals"].items()))
    if report["witness"] is not None:
        kind = report["witness"].get("kind", "object") if isinstance(report["witness"], dict) else "object"
        lines.append(f"witness: {kind}")
    lines.append(f"seed: {report['seed']}")
    lines.append(
        "tolerances: rank_eps=%g member_eps=%g"
        % (report["tolerances"]["rank_eps"], report["tolerances"]["member_eps"])
    )
    lines.append(f"wall_time_ms: {report['wall_time_ms']}")
    out.write("\n".join(lines) + "\n")


def _conditions_map(rep) -> dict:
    return {c.name: c.residual for c in rep.conditions}


def _load_system_input(path: str, tol: Tolerance) -> algebras.QuantumGraph:
    """A quantum graph from either a graph file or a quantum_graph file."""
    obj = read_object(path)
    if obj["kind"] == "graph":
        return classical.graph_operator_system(load_graph(obj), tol)
    if obj["kind"] == "quantum_graph":
        system, algebra = load_quantum_graph_spaces(obj, tol)
        return algebras.validate_quantum_graph(system, algebra)
    raise ParseError(f"{path}: expected a graph or quantum_graph file, got {obj['kind']!r}")


# --- subcommands -------------------------------------------------------------

def cmd_validate(args, t0) -> tuple[dict, int]:
    tol = _tolerance(args)
    obj = read_object(args.input)
    kind = obj["kind"]
    residuals: dict = {}
    try:
        if kind == "graph":
            classical.graph_operator_system(load_graph(obj), tol)
        elif kind == "subspace":
            load_subspace(obj, tol)
        elif kind == "operator_system":
            algebras.validate_operator_system(load_operator_system_space(obj, tol))
        elif kind == "quantum_graph":
            system, algebra = load_quantum_graph_spaces(obj, tol)
            algebras.validate_quantum_graph(system, algebra)
        elif kind == "kraus":
            rep = morita.validate_kraus(load_kraus(obj, tol))
            residuals = _conditions_map(rep)
        else:
            morita.tro_from_space(load_tro_space(obj, tol))
    except (ValidationFailed, NotUnitalAlgebra, Degenerate) as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return _report(args, "validate", "fail", residuals, None, t0), EXIT_FAIL
    return _report(args, "validate", "ok", residuals, None, t0), EXIT_PASS


def cmd_skeleton(args, t0) -> tuple[dict, int]:
    tol = _tolerance(args)
    if args.classical:
        g = load_graph(read_object(args.classical))
        reduced, quotient = classical.skeleton_graph(g)
        out = graph_object(reduced)
        witness = {"quotient": list(quotient.image)}
        residuals: dict = {}
    else:
        qg = _load_system_input(args.quantum, tol)
        res = skeleton.quantum_skeleton(qg, seed=args.seed)
        out = quantum_graph_object(res.reduced_system, res.reduced_algebra)
        witness = {"blocks": [list(b) for b in res.blocks.blocks]}
        residuals = {"decomposition": res.blocks.residual}
    if args.out:
        write_object(out, args.out)
    else:
        witness["skeleton"] = out
    return _report(args, "skeleton", "ok", residuals, witness, t0), EXIT_PASS


def cmd_tro(args, t0) -> tuple[dict, int]:
    tol = _tolerance(args)
    if args.decide:
        s = _load_system_input(args.decide[0], tol)
        t = _load_system_input(args.decide[1], tol)
        budget = skeleton.SearchBudget(restarts=args.budget_restarts, iters=args.budget_iters)
        dec = skeleton.decide_tro_equivalence(s, t, budget=budget, seed=args.seed)
        residuals = _conditions_map(dec.report) if dec.report is not None else {}
        witness = tro_object(dec.witness) if dec.witness is not None else None
        if dec.reason:
            print(dec.reason, file=sys.stderr)
        code = {
            skeleton.TroVerdict.EQUIVALENT: EXIT_PASS,
            skeleton.TroVerdict.NOT_EQUIVALENT: EXIT_FAIL,
            skeleton.TroVerdict.UNDECIDED: EXIT_UNDECIDED,
        }[dec.verdict]
        return _report(args, "tro", dec.verdict.value, residuals, witness, t0), code
    if args.verify:
        m = morita.TroSpace.from_space(load_tro_space(read_object(args.verify[0]), tol))
        s = _load_system_input(args.verify[1], tol)
        t = _load_system_input(args.verify[2], tol)
        rep = morita.verify_tro_equivalence(m, s, t)
    else:
        obj = read_object(args.balanced[0])
        if obj["kind"] == "kraus":
            m = load_kraus(obj, tol)
        elif obj["kind"] == "tro":
            m = morita.TroSpace.from_space(load_tro_space(obj, tol))
        else:
            raise ParseError(f"{args.balanced[0]}: expected a tro or kraus file")
        s = _load_system_input(args.balanced[1], tol)
        t = _load_system_input(args.balanced[2], tol)
        rep = morita.verify_balanced_equivalence(m, s, t)
    verdict = "pass" if rep.ok else "fail"
    return (
        _report(args, "tro", verdict, _conditions_map(rep), None, t0),
        EXIT_PASS if rep.ok else EXIT_FAIL,
    )


def cmd_morita(args, t0) -> tuple[dict, int]:
    tol = _tolerance(args)
    if args.check_pullback:
        phi = load_kraus(read_object(args.check_pullback[0]), tol)
        t = _load_system_input(args.check_pullback[1], tol)
        s = _load_system_input(args.check_pullback[2], tol)
        verdict = morita.is_pullback_homomorphism(phi, t, s)
        code = EXIT_FAIL if verdict is morita.PullbackVerdict.NO else EXIT_PASS
        return _report(args, "morita", verdict.value, {}, None, t0), code
    files = args.pullback if args.pullback else args.pushforward
    phi = load_kraus(read_object(files[0]), tol)
    system = _load_system_input(files[1], tol)
    if args.pullback:
        space = morita.pullback(system, phi)
    else:
        space = morita.pushforward(system, phi)
    witness = None
    if args.out:
        write_object(subspace_object(space), args.out)
    else:
        witness = subspace_object(space)
    return _report(args, "morita", "ok", {"dim": float(space.dim)}, witness, t0), EXIT_PASS


def _graph_connected(g: classical.Graph) -> bool:
    if g.n == 0:
        return True
    seen = {0}
    frontier = [0]
    while frontier:
        x = frontier.pop()
        for y in range(g.n):
            if y not in seen and g.adjacent(x, y):
                seen.add(y)
                frontier.append(y)
    return len(seen) == g.n


def _load_certificate(path: str) -> list[np.ndarray]:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    vectors = obj.get("vectors") if isinstance(obj, dict) else None
    if not isinstance(vectors, list) or not vectors:
        raise ParseError(f"{path}: expected an object with a non-empty 'vectors' list")
    out = []
    for i, v in enumerate(vectors):
        if not isinstance(v, list) or not v:
            raise ParseError(f"{path}: vectors[{i}] must be a non-empty list")
        out.append(np.array([_decode_scalar(z, f"vectors[{i}]") for z in v]))
    if any(v.shape != out[0].shape for v in out):
        raise ParseError(f"{path}: vectors disagree in length")
    return out


def cmd_params(args, t0) -> tuple[dict, int]:
    tol = _tolerance(args)
    obj = read_object(args.input)
    if obj["kind"] == "graph":
        g = load_graph(obj)
        residuals = {
            "alpha": float(classical.independence_number(g)),
            "omega": float(classical.clique_number(g)),
            "chi": float(classical.chromatic_number(g)),
            "connected": 1.0 if _graph_connected(g) else 0.0,
        }
        return _report(args, "params", "ok", residuals, None, t0), EXIT_PASS
    if obj["kind"] != "quantum_graph":
        raise ParseError(f"{args.input}: expected a graph or quantum_graph file")
    qg = _load_system_input(args.input, tol)
    cstar = algebras.generated_cstar(qg.space)
    residuals = {"connected": 1.0 if cstar.dim == qg.ambient * qg.ambient else 0.0}
    verdict = "ok"
    code = EXIT_PASS
    if args.certificate:
        vectors = _load_certificate(args.certificate)
        if any(v.shape != (qg.ambient,) for v in vectors):
            raise ParseError("certificate vectors do not match the ambient dimension")
        gram = np.array([[np.vdot(v, w) for w in vectors] for v in vectors])
        gram_res = float(np.linalg.norm(gram - np.eye(len(vectors))))
        # independence asks the opposite of membership: the projection of
        # xi_i xi_j* onto S must vanish for every i != j
        overlap = 0.0
        for i, v in enumerate(vectors):
            for j, w in enumerate(vectors):
                if i != j:
                    proj = float(np.linalg.norm(qg.space.project(np.outer(v, w.conj()))))
                    overlap = max(overlap, proj)
        residuals["certificate_gram"] = gram_res
        residuals["certificate_overlap"] = overlap
        residuals["certificate_size"] = float(len(vectors))
        if gram_res > tol.member_eps or overlap > tol.member_eps:
            verdict = "fail"
            code = EXIT_FAIL
    return _report(args, "params", verdict, residuals, None, t0), code


# --- selftest corpus ---------------------------------------------------------

def _unit(i, j, n, m=None):
    e = np.zeros((n, m if m is not None else n), dtype=np.complex128)
    e[i, j] = 1.0
    return e


def _span(tol, *mats):
    mats = list(mats)
    return orthonormalize(mats, tol, shape=mats[0].shape)


def _embed(x, r0, c0, n):
    m = np.zeros((n, n), dtype=np.complex128)
    m[r0 : r0 + x.shape[0], c0 : c0 + x.shape[1]] = x
    return m


_BLOWUP_A = classical.Graph.make(
    6, [(0, 1), (0, 2), (1, 2), (2, 3), (2, 4), (2, 5), (3, 4), (3, 5), (4, 5)]
)
_BLOWUP_B = classical.Graph.make(
    5, [(0, 1), (0, 2), (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
)
_CONTRAST_A = classical.Graph.make(4, [(0, 1), (2, 3)])
_CONTRAST_B = classical.Graph.make(4, [(0, 1), (0, 2), (0, 3), (2, 3)])


def _corpus_two_layer(tol) -> tuple[algebras.QuantumGraph, algebras.QuantumGraph]:
    n = 7
    s_mats = [_embed(np.kron(_unit(i, j, 2), np.eye(2)), 0, 0, n) for i in range(2) for j in range(2)]
    for r in range(2):
        for a in range(2):
            for b in range(3):
                s_mats.append(_embed(np.kron(_unit(r, 0, 2, 1), _unit(a, b, 2, 3)), 0, 4, n))
                s_mats.append(_embed(np.kron(_unit(0, r, 1, 2), _unit(b, a, 3, 2)), 4, 0, n))
    s_mats.append(_embed(np.eye(3), 4, 4, n))
    a_mats = [_embed(np.kron(np.eye(2), _unit(i, j, 2)), 0, 0, n) for i in range(2) for j in range(2)]
    a_mats += [_embed(_unit(i, j, 3), 4, 4, n) for i in range(3) for j in range(3)]
    source = algebras.validate_quantum_graph(_span(tol, *s_mats), _span(tol, *a_mats))

    m = 12
    t_mats = [_embed(np.kron(_unit(i, j, 3), np.eye(2)), 0, 0, m) for i in range(3) for j in range(3)]
    for r in range(3):
        for s_ in range(2):
            for a in range(2):
                for b in range(3):
                    t_mats.append(_embed(np.kron(_unit(r, s_, 3, 2), _unit(a, b, 2, 3)), 0, 6, m))
                    t_mats.append(_embed(np.kron(_unit(s_, r, 2, 3), _unit(b, a, 3, 2)), 6, 0, m))
    t_mats += [_embed(np.kron(_unit(i, j, 2), np.eye(3)), 6, 6, m) for i in range(2) for j in range(2)]
    b_mats = [_embed(np.kron(np.eye(3), _unit(i, j, 2)), 0, 0, m) for i in range(2) for j in range(2)]
    b_mats += [_embed(np.kron(np.eye(2), _unit(i, j, 3)), 6, 6, m) for i in range(3) for j in range(3)]
    target = algebras.validate_quantum_graph(_span(tol, *t_mats), _span(tol, *b_mats))
    return source, target


def _corpus_exchange(tol) -> tuple[algebras.QuantumGraph, algebras.QuantumGraph]:
    t_el = [np.eye(2, dtype=np.complex128), _unit(0, 1, 2), _unit(1, 0, 2)]
    full2 = [_unit(i, j, 2) for i in range(2) for j in range(2)]
    small = algebras.validate_quantum_graph(_span(tol, *t_el), _span(tol, *full2))
    s_mats = [np.kron(_unit(i, j, 2), t) for i in range(2) for j in range(2) for t in t_el]
    a_mats = [np.kron(np.eye(2), _unit(i, j, 2)) for i in range(2) for j in range(2)]
    big = algebras.validate_quantum_graph(_span(tol, *s_mats), _span(tol, *a_mats))
    return small, big


def _corpus_mixing_channel(tol) -> morita.KrausMap:
    pairs = [(0, 0), (1, 0), (1, 1), (2, 1), (0, 2), (2, 2)]
    kraus = tuple(_unit(a, b, 3) / np.sqrt(2) for a, b in pairs)
    diag = _span(tol, *[np.diag(np.eye(3, dtype=np.complex128)[i]) for i in range(3)])
    return morita.KrausMap(3, 3, kraus, diag, diag)


def _case_blowup_twin_classes(tol) -> float:
    assert classical.true_twin_classes(_BLOWUP_A).classes == ((0, 1), (2,), (3, 4, 5))
    assert classical.true_twin_classes(_BLOWUP_B).classes == ((0,), (1, 2), (3, 4))
    return 0.0


def _case_blowup_skeletons(tol) -> float:
    p3 = classical.path_graph(3)
    for g in (_BLOWUP_A, _BLOWUP_B):
        reduced, _ = classical.skeleton_graph(g)
        assert classical.graph_isomorphism(reduced, p3) is not None
    return 0.0


def _case_blowup_reconstruction(tol) -> float:
    p3 = classical.path_graph(3)
    big = classical.clique_blowup(p3, (2, 1, 3))
    small = classical.clique_blowup(p3, (1, 2, 2))
    assert classical.graph_isomorphism(big, _BLOWUP_A) is not None
    assert classical.graph_isomorphism(small, _BLOWUP_B) is not None
    return 0.0


def _case_blowup_equivalent(tol) -> float:
    ok, witness = classical.tro_equivalent_graphs(_BLOWUP_A, _BLOWUP_B)
    assert ok and witness is not None
    return 0.0


def _case_blowup_decision(tol) -> float:
    dec = skeleton.decide_tro_equivalence(
        classical.graph_operator_system(_BLOWUP_A, tol),
        classical.graph_operator_system(_BLOWUP_B, tol),
    )
    assert dec.verdict is skeleton.TroVerdict.EQUIVALENT and dec.report.ok
    return max(c.residual for c in dec.report.conditions)


def _case_contrast_independence(tol) -> float:
    assert classical.independence_number(_CONTRAST_A) == 2
    assert classical.independence_number(_CONTRAST_B) == 2
    return 0.0


def _case_contrast_skeletons(tol) -> float:
    reduced_a, _ = classical.skeleton_graph(_CONTRAST_A)
    reduced_b, _ = classical.skeleton_graph(_CONTRAST_B)
    assert reduced_a.n == 2 and not reduced_a.edges
    assert classical.graph_isomorphism(reduced_b, classical.path_graph(3)) is not None
    return 0.0


def _case_contrast_not_equivalent(tol) -> float:
    ok, _ = classical.tro_equivalent_graphs(_CONTRAST_A, _CONTRAST_B)
    assert not ok
    dec = skeleton.decide_tro_equivalence(
        classical.graph_operator_system(_CONTRAST_A, tol),
        classical.graph_operator_system(_CONTRAST_B, tol),
    )
    assert dec.verdict is skeleton.TroVerdict.NOT_EQUIVALENT
    return 0.0


def _case_contrast_complements(tol) -> float:
    comp_a, comp_b = _CONTRAST_A.complement(), _CONTRAST_B.complement()
    assert all(len(c) == 1 for c in classical.true_twin_classes(comp_a).classes)
    assert all(len(c) == 1 for c in classical.true_twin_classes(comp_b).classes)
    ok, _ = classical.tro_equivalent_graphs(comp_a, comp_b)
    assert not ok
    return 0.0


def _case_clique_pair(tol) -> float:
    k2, k3 = classical.complete_graph(2), classical.complete_graph(3)
    ok, _ = classical.tro_equivalent_graphs(k2, k3)
    assert ok
    assert (classical.clique_number(k2), classical.chromatic_number(k2)) == (2, 2)
    assert (classical.clique_number(k3), classical.chromatic_number(k3)) == (3, 3)
    return 0.0


def _case_multiplier_blocks(tol) -> float:
    qg = classical.graph_operator_system(_BLOWUP_A, tol)
    mult = algebras.multiplier_algebra(qg.system)
    dec = algebras.block_decomposition(mult)
    assert sorted(dec.alphas) == [1, 2, 3]
    assert set(dec.multiplicities) == {1}
    return dec.residual


def _case_mixing_valid(tol) -> float:
    phi = _corpus_mixing_channel(tol)
    rep = morita.validate_kraus(phi)
    faith = morita.is_faithful(phi)
    assert rep.ok and faith.faithful
    return max(c.residual for c in rep.conditions)


def _case_mixing_not_homomorphism(tol) -> float:
    phi = _corpus_mixing_channel(tol)
    assert not morita.is_star_homomorphism(phi)
    return 0.0


def _case_mixing_pullback(tol) -> float:
    phi = _corpus_mixing_channel(tol)
    edgeless = classical.graph_operator_system(classical.Graph.make(3, []), tol)
    pulled = morita.pullback(edgeless, phi)
    assert pulled.dim == 9
    return 0.0


def _case_quotient_pullback(tol) -> float:
    reduced, quotient = classical.skeleton_graph(_BLOWUP_A)
    theta = classical.canonical_pullback_channel(quotient, tol)
    s = classical.graph_operator_system(_BLOWUP_A, tol)
    t = classical.graph_operator_system(reduced, tol)
    verdict = morita.is_pullback_homomorphism(theta, t, s)
    assert verdict is morita.PullbackVerdict.FULL_PULLBACK
    back = morita.pushforward(s, theta)
    return max(subspace_defect(back, t.space), subspace_defect(t.space, back))


def _case_amplification_pullback(tol) -> float:
    small, big = _corpus_exchange(tol)
    kraus = (np.kron(_unit(0, 0, 1, 2), np.eye(2)), np.kron(_unit(0, 1, 1, 2), np.eye(2)))
    theta = morita.KrausMap(4, 2, kraus, small.algebra, big.algebra)
    verdict = morita.is_pullback_homomorphism(theta, small, big)
    assert verdict is morita.PullbackVerdict.FULL_PULLBACK
    pulled = morita.pullback(small, theta)
    expected = algebras.tensor_system(
        orthonormalize([_unit(i, j, 2) for i in range(2) for j in range(2)], tol, shape=(2, 2)),
        small.space,
    )
    assert equals(pulled, expected)
    return 0.0


def _case_amplification_unbalanced(tol) -> float:
    small, big = _corpus_exchange(tol)
    kraus = (np.kron(_unit(0, 0, 1, 2), np.eye(2)), np.kron(_unit(0, 1, 1, 2), np.eye(2)))
    theta = morita.KrausMap(4, 2, kraus, small.algebra, big.algebra)
    rep = morita.verify_balanced_equivalence(theta, big, small)
    assert not rep.ok
    assert "algebra_pullback" in rep.failed()
    assert rep.residual("system_pullback") <= tol.member_eps
    assert rep.residual("system_pushforward") <= tol.member_eps
    return 0.0


def _case_two_layer_blocks(tol) -> float:
    source, _ = _corpus_two_layer(tol)
    res = skeleton.quantum_skeleton(source)
    assert res.blocks.blocks == ((2, 2), (1, 3))
    assert res.slice_blocks[0][1].dim == 6
    return res.blocks.residual


def _case_two_layer_ambient(tol) -> float:
    source, _ = _corpus_two_layer(tol)
    cstar = algebras.generated_cstar(source.space)
    assert cstar.dim == 49
    return 0.0


def _case_two_layer_equivalent(tol) -> float:
    source, target = _corpus_two_layer(tol)
    dec = skeleton.decide_tro_equivalence(source, target)
    assert dec.verdict is skeleton.TroVerdict.EQUIVALENT and dec.report.ok
    return max(c.residual for c in dec.report.conditions)


def _case_exchange_equivalent(tol) -> float:
    small, big = _corpus_exchange(tol)
    dec = skeleton.decide_tro_equivalence(small, big)
    assert dec.verdict is skeleton.TroVerdict.EQUIVALENT and dec.report.ok
    return max(c.residual for c in dec.report.conditions)


def _case_full_matrix_point(tol) -> float:
    full5 = orthonormalize(
        [_unit(i, j, 5) for i in range(5) for j in range(5)], tol, shape=(5, 5)
    )
    qg = algebras.validate_quantum_graph(full5, full5)
    res = skeleton.quantum_skeleton(qg)
    assert res.skeleton_dim == 1 and res.reduced_system.dim == 1
    return 0.0


def _case_unitary_roundtrip(tol) -> float:
    rng = np.random.default_rng(17)
    z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    q, r = np.linalg.qr(z)
    u = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    mats = [np.kron(_unit(a, b, 2, 2), u) for a in range(2) for b in range(2)]
    tro = morita.TroSpace.from_space(orthonormalize(mats, tol, shape=(6, 6)))
    recovered = skeleton.tro_between_amplified_factors(tro)
    col = u[:, 0]
    pivot = col[np.abs(col) > 1e-6][0]
    err = float(np.max(np.abs(recovered - u * (abs(pivot) / pivot))))
    assert err < 1e-8
    return err


def _case_params_complete(tol) -> float:
    k4 = classical.complete_graph(4)
    assert classical.independence_number(k4) == 1
    assert classical.clique_number(k4) == 4
    assert classical.chromatic_number(k4) == 4
    assert _graph_connected(k4)
    return 0.0


def _case_params_disconnected(tol) -> float:
    assert classical.independence_number(_CONTRAST_A) == 2
    assert not _graph_connected(_CONTRAST_A)
    return 0.0


_CORPUS: tuple[tuple[str, Callable[[Tolerance], float]], ...] = (
    ("amplification-pullback", _case_amplification_pullback),
    ("amplification-unbalanced", _case_amplification_unbalanced),
    ("blowup-pair-decision", _case_blowup_decision),
    ("blowup-pair-equivalent", _case_blowup_equivalent),
    ("blowup-pair-reconstruction", _case_blowup_reconstruction),
    ("blowup-pair-skeletons", _case_blowup_skeletons),
    ("blowup-pair-twin-classes", _case_blowup_twin_classes),
    ("clique-pair-parameters", _case_clique_pair),
    ("contrast-pair-complements", _case_contrast_complements),
    ("contrast-pair-independence", _case_contrast_independence),
    ("contrast-pair-not-equivalent", _case_contrast_not_equivalent),
    ("contrast-pair-skeletons", _case_contrast_skeletons),
    ("exchange-amplification-equivalent", _case_exchange_equivalent),
    ("full-matrix-skeleton-point", _case_full_matrix_point),
    ("mixing-channel-not-homomorphism", _case_mixing_not_homomorphism),
    ("mixing-channel-pullback", _case_mixing_pullback),
    ("mixing-channel-valid", _case_mixing_valid),
    ("multiplier-block-sizes", _case_multiplier_blocks),
    ("params-complete-four", _case_params_complete),
    ("params-contrast-disconnected", _case_params_disconnected),
    ("quotient-pullback", _case_quotient_pullback),
    ("two-layer-ambient-full", _case_two_layer_ambient),
    ("two-layer-blocks", _case_two_layer_blocks),
    ("two-layer-equivalent", _case_two_layer_equivalent),
    ("unitary-factor-roundtrip", _case_unitary_roundtrip),
)

_CORPUS_NAMES = ("examples", "paper")


def cmd_selftest(args, t0) -> tuple[dict, int]:
    if args.corpus not in _CORPUS_NAMES:
        raise ParseError(f"unknown corpus {args.corpus!r} (expected one of {_CORPUS_NAMES})")
    tol = _tolerance(args)
    selected = [
        (name, fn) for name, fn in _CORPUS if not args.filter or args.filter in name
    ]

    def run(entry):
        name, fn = entry
        try:
            return name, True, fn(tol), None
        except Exception as exc:  # noqa: BLE001 - each case reports its own failure
            return name, False, 1.0, f"{type(exc).__name__}: {exc}"

    workers = max(1, min(8, os.cpu_count() or 1))
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(run, selected))
    outcomes.sort(key=lambda o: o[0])
    residuals = {name: res for name, _, res, _ in outcomes}
    failed = [name for name, ok, _, _ in outcomes if not ok]
    for name, ok, _, detail in outcomes:
        if not ok:
            print(f"{name}: {detail}", file=sys.stderr)
    witness = {"cases_run": len(outcomes), "failed": failed}
    verdict = "pass" if not failed else "fail"
    code = EXIT_PASS if not failed else EXIT_FAIL
    return _report(args, "selftest", verdict, residuals, witness, t0), code


# --- argument parsing --------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-rank", type=float, default=1e-9, metavar="EPS")
    common.add_argument("--tol-member", type=float, default=1e-8, metavar="EPS")
    common.add_argument(
        "--seed", type=int, default=int(os.environ.get("QGRAPH_SEED", "0"))
    )
    common.add_argument("--budget-restarts", type=int, default=50, metavar="N")
    common.add_argument("--budget-iters", type=int, default=500, metavar="N")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--out", metavar="FILE")

    parser = argparse.ArgumentParser(
        prog="qgraph", description="Quantum graph pipelines over JSON object files."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="validate an object file")
    p.add_argument("input")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("skeleton", parents=[common], help="true-twin reduction")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--classical", metavar="GRAPH")
    grp.add_argument("--quantum", metavar="QGRAPH")
    p.set_defaults(func=cmd_skeleton)

    p = sub.add_parser("tro", parents=[common], help="decide or verify TRO equivalence")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--decide", nargs=2, metavar=("A", "B"))
    grp.add_argument("--verify", nargs=3, metavar=("M", "A", "B"))
    grp.add_argument("--balanced", nargs=3, metavar=("M", "A", "B"))
    p.set_defaults(func=cmd_tro)

    p = sub.add_parser("morita", parents=[common], help="Kraus pullback and pushforward")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--pullback", nargs=2, metavar=("KRAUS", "SYSTEM"))
    grp.add_argument("--pushforward", nargs=2, metavar=("KRAUS", "SYSTEM"))
    grp.add_argument("--check-pullback", nargs=3, metavar=("KRAUS", "T", "S"))
    p.set_defaults(func=cmd_morita)

    p = sub.add_parser("params", parents=[common], help="graph and system parameters")
    p.add_argument("input")
    p.add_argument("--certificate", metavar="FILE")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("selftest", parents=[common], help="run the example corpus")
    p.add_argument("--corpus", default="examples")
    p.add_argument("--filter", default="", metavar="SUBSTRING")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    t0 = time.monotonic()
    try:
        report, code = args.func(args, t0)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_UNDECIDED
    except QGraphError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_PARSE
    _emit(report, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
