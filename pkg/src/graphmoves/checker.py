"""Re-verification of serialized certificates.

Works from JSON alone with its own list-based integer arithmetic; the only
shared code is move application, used to replay traces."""

from __future__ import annotations

import json

from .graph_core import Graph, ext_from_json, ext_to_json
from .moves import MoveSpec, apply_move


def _graph(rows) -> Graph:
    return Graph.from_rows([[ext_from_json(x) for x in r] for r in rows])


def _mul(A, B):
    if not A or not B:
        return [[0] * (len(B[0]) if B else 0) for _ in A]
    return [[sum(a * b for a, b in zip(row, col)) for col in zip(*B)] for row in A]


def _det(M) -> int:
    n = len(M)
    if n == 0:
        return 1
    A = [list(r) for r in M]
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            p = next((i for i in range(k + 1, n) if A[i][k] != 0), None)
            if p is None:
                return 0
            A[k], A[p] = A[p], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def _bullet(rows) -> list[list[int]]:
    """Rows of A - I at regular vertices (finite, nonzero out-degree)."""
    out = []
    for i, r in enumerate(rows):
        if any(x == "inf" for x in r) or sum(r) == 0:
            continue
        out.append([int(x) - (i == j) for j, x in enumerate(r)])
    return out


def _ranges(sizes):
    out, s = [], 0
    for k in sizes:
        out.append(list(range(s, s + k)))
        s += k
    return out


def _block(M, rows, cols):
    return [[M[r][c] for c in cols] for r in rows]


def _check_block_form(name, X, leq, sizes, errs):
    R = _ranges(sizes)
    dets = []
    for i, ri in enumerate(R):
        for j, rj in enumerate(R):
            if not leq[i][j] and any(X[r][c] for r in ri for c in rj):
                errs.append(f"{name}: nonzero block ({i + 1},{j + 1}) outside the order")
        dets.append(_det(_block(X, ri, ri)))
    for i, d in enumerate(dets):
        if d not in (1, -1):
            errs.append(f"{name}: block {i + 1} has determinant {d}")
    return dets


def check_equivalence(d: dict) -> list[str]:
    errs = []
    w = d["witness"]
    U, V = w["U"], w["V"]
    S, T = w["source"], w["target"]
    if S["poset"] != T["poset"] or S["m"] != T["m"] or S["n"] != T["n"]:
        errs.append("source and target shapes differ")
        return errs
    if _mul(_mul(U, S["entries"]), V) != T["entries"]:
        errs.append("U B V differs from the target")
    leq = S["poset"]
    du = _check_block_form("U", U, leq, S["m"], errs)
    dv = _check_block_form("V", V, leq, S["n"], errs)
    if d.get("require") == "SLP":
        if any(x != 1 for x in du + dv):
            errs.append("a diagonal determinant is not 1")
    for want, got, tag in ((d.get("det_U"), du, "U"), (d.get("det_V"), dv, "V")):
        if want is not None and list(want) != got:
            errs.append(f"det {tag} blocks {got}, expected {list(want)}")
    R = _ranges(S["n"])
    for i in d.get("pin_v", []):
        if _block(V, R[i - 1], R[i - 1]) != [[1]]:
            errs.append(f"V{{{i}}} is not 1")
    if "target_graph" in d and _bullet(d["target_graph"]) != T["entries"]:
        errs.append("target is not the matrix of the target graph")
    if "source_graph" in d:
        errs += _check_padded(S, d["pad"], d["source_graph"])
    return errs


def _check_padded(S, pad, rows) -> list[str]:
    """S must be the matrix of the graph with -1 pads closing each block."""
    m0 = [a - r for a, r in zip(S["m"], pad)]
    n0 = [a - r for a, r in zip(S["n"], pad)]
    pr = [i for blk, k in zip(_ranges(S["m"]), m0) for i in blk[k:]]
    pc = [j for blk, k in zip(_ranges(S["n"]), n0) for j in blk[k:]]
    M = S["entries"]
    for a, b in zip(pr, pc):
        if M[a] != [-(j == b) for j in range(len(M[a]))]:
            return ["pad row is not -e"]
        if [M[i][b] for i in range(len(M))] != [-(i == a) for i in range(len(M))]:
            return ["pad column is not -e"]
    kr = [i for i in range(len(M)) if i not in pr]
    kc = [j for j in range(len(M[0]) if M else 0) if j not in pc]
    if _block(M, kr, kc) != _bullet(rows):
        return ["source is not the padded matrix of the source graph"]
    return []


def _replay(trace: dict) -> tuple[list, list[str]]:
    g = _graph(trace["start"])
    graphs = [g]
    for k, st in enumerate(trace["steps"]):
        if g.digest() != st["pre"]:
            return graphs, [f"step {k + 1}: pre-graph hash mismatch"]
        try:
            g = apply_move(g, MoveSpec.from_json(st["move"]))
        except Exception as e:
            return graphs, [f"step {k + 1}: {e}"]
        if g.digest() != st["post"]:
            return graphs, [f"step {k + 1}: post-graph hash mismatch"]
        graphs.append(g)
    if _graph(trace["end"]).digest() != g.digest():
        return graphs, ["trace end differs"]
    return graphs, []


def _rows(g: Graph) -> list:
    return [[ext_to_json(x) for x in r] for r in g.adj]


def check_canonical(d: dict) -> list[str]:
    errs = []
    tr = d["trace"]
    if _graph(tr["start"]).digest() != _graph(d["graph"]).digest():
        errs.append("trace does not start at the graph")
    graphs, e = _replay(tr)
    errs += e
    if e:
        return errs
    if graphs[-1].digest() != _graph(d["canonical"]).digest():
        errs.append("trace does not end at the canonical graph")
    k = d["anchor"]
    if not 0 <= k < len(graphs):
        return errs + ["anchor out of range"]
    eq = {"type": "equivalence", "require": "SLP", "witness": d["witness"],
          "source_graph": _rows(graphs[k]), "pad": d["pad"], "target_graph": d["canonical"]}
    errs += check_equivalence(eq)
    return errs


def check_compare(d: dict) -> list[str]:
    errs = []
    c1, c2 = d["canonical1"], d["canonical2"]
    if c1["graph"] != d["g1"] or c2["graph"] != d["g2"]:
        errs.append("canonical certificates are for other graphs")
    errs += [f"canonical1: {e}" for e in check_canonical(c1)]
    errs += [f"canonical2: {e}" for e in check_canonical(c2)]
    lift = d["lift"]
    w = lift["witness"]
    if w["source"] != c1["witness"]["target"] or w["target"] != c2["witness"]["target"]:
        errs.append("lift does not join the canonical forms")
    errs += [f"lift: {e}" for e in check_equivalence(lift)]
    pinned = [i + 1 for i, k in enumerate(w["source"]["n"]) if k == 1]
    if sorted(lift.get("pin_v", [])) != pinned:
        errs.append("lift does not pin V on all blocks with n = 1")
    if "unit" in d:
        u = d["unit"]
        V, B2 = w["V"], w["target"]["entries"]
        lhs = [sum(V[i][j] * u["x1"][i] for i in range(len(V))) for j in range(len(V))]
        rhs = [sum(B2[i][j] * u["y"][i] for i in range(len(B2))) for j in range(len(V))]
        if [a - b for a, b in zip(lhs, u["x2"])] != rhs:
            errs.append("unit class is not carried to the unit class")
    if "moves" in d:
        errs += [f"moves: {e}" for e in _check_moves(d["moves"], c1["canonical"], c2["canonical"])]
    return errs


def _check_moves(m: dict, f1, f2) -> list[str]:
    errs = []
    ends = []
    for key, start in (("repair1", f1), ("repair2", f2)):
        tr = m[key]
        if _graph(tr["start"]).digest() != _graph(start).digest():
            errs.append(f"{key} starts elsewhere")
        graphs, e = _replay(tr)
        errs += [f"{key}: {x}" for x in e]
        ends.append(graphs[-1])
    w = m["witness"]
    errs += check_equivalence(w)
    if _bullet(_rows(ends[0])) != w["witness"]["source"]["entries"]:
        errs.append("SL witness source is not the repaired first graph")
    if _bullet(_rows(ends[1])) != w["witness"]["target"]["entries"]:
        errs.append("SL witness target is not the repaired second graph")
    tr = m["trace"]
    graphs, e = _replay(tr)
    errs += e
    if graphs[0].digest() != ends[0].digest() or graphs[-1].digest() != ends[1].digest():
        errs.append("move trace does not join the repaired graphs")
    return errs


CHECKS = {"equivalence": check_equivalence, "canonical": check_canonical,
          "compare": check_compare}


def check_certificate(d) -> list[str]:
    """Failures found in a certificate (a dict or its JSON text); empty when
    it verifies."""
    if isinstance(d, str):
        d = json.loads(d)
    kind = d.get("type")
    if kind not in CHECKS:
        return [f"unknown certificate type {kind!r}"]
    try:
        return CHECKS[kind](d)
    except (KeyError, IndexError, TypeError, ValueError) as e:
        return [f"malformed certificate: {e!r}"]
