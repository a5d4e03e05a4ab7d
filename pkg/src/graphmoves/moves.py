"""Graph moves on multiplicity matrices, traces, and the equivalence witnesses
attached to splices, expansions, row/column additions and the eclosing move.

Vertex labels in ``MoveSpec`` are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import intmat as im
from .blocks import BlockedGraphForm, EquivWitness, blocked, neg_iota, square
from .errors import IllegalAddition, IneligibleMove
from .graph_core import (INF, Graph, b_matrix, ext_from_json, ext_to_json, reachability0)
from .structure import (assumption_hash_check, components, moveP_eligible,
                        return_path_counts0)

KINDS = ("S", "R", "O", "I", "Col", "C", "P", "RowAdd", "ColAdd", "RowSub", "ColSub",
         "EdgeExpand", "Relabel")


@dataclass(frozen=True)
class MoveSpec:
    kind: str
    u: int | None = None
    v: int | None = None
    partition: tuple | None = None
    perm: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown move kind {self.kind!r}")
        if self.partition is not None:
            object.__setattr__(self, "partition",
                               tuple(tuple(r) for r in self.partition))
        if self.perm is not None:
            object.__setattr__(self, "perm", tuple(self.perm))

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        if self.u is not None:
            d["u"] = self.u
        if self.v is not None:
            d["v"] = self.v
        if self.partition is not None:
            d["partition"] = [[ext_to_json(x) for x in r] for r in self.partition]
        if self.perm is not None:
            d["perm"] = list(self.perm)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "MoveSpec":
        part = d.get("partition")
        if part is not None:
            part = tuple(tuple(ext_from_json(x) for x in r) for r in part)
        return cls(d["kind"], d.get("u"), d.get("v"), part, d.get("perm"))

    def __str__(self):
        if self.kind == "Relabel":
            return f"Relabel{list(self.perm)}"
        args = [str(x) for x in (self.u, self.v) if x is not None]
        sep = "->" if self.v is not None else ","
        return f"{self.kind}({sep.join(args)})"


# ---------------------------------------------------------------------------
# primitive constructions on 0-based lists


def _rows(g: Graph) -> list[list]:
    return [list(r) for r in g.adj]


def _delete(A: list[list], v: int) -> list[list]:
    return [[x for j, x in enumerate(r) if j != v] for i, r in enumerate(A) if i != v]


def _insert_vertices(A: list[list], pos: int, k: int) -> list[list]:
    """Insert k isolated vertices before 0-based position pos."""
    n = len(A)
    out = []
    for i in range(n + k):
        if pos <= i < pos + k:
            out.append([0] * (n + k))
        else:
            src = i if i < pos else i - k
            row = A[src]
            out.append(row[:pos] + [0] * k + row[pos:])
    return out


def _shift(v: int, pos: int, k: int) -> int:
    return v if v < pos else v + k


def component_end0(g: Graph, v: int) -> int:
    """Largest index of the strongly connected set containing 0-based v."""
    R = reachability0(g)
    return max(w for w in range(g.n) if R[v][w] and R[w][v])


def cuntz_splice_raw(g: Graph, v: int, at: int | None = None) -> tuple[Graph, list]:
    """Splice at 0-based v; the two new vertices go to 0-based positions
    at, at+1 (default right after v's strongly connected set)."""
    if at is None:
        at = component_end0(g, v) + 1
    A = _insert_vertices(_rows(g), at, 2)
    v2 = _shift(v, at, 2)
    u1, u2 = at, at + 1
    A[v2][u1] += 1
    A[u1][v2] += 1
    A[u1][u1] += 1
    A[u1][u2] += 1
    A[u2][u1] += 1
    A[u2][u2] += 1
    mapping = [_shift(x, at, 2) for x in range(g.n)]
    return Graph.from_rows(A), mapping


def cuntz_splice(g: Graph, v: int) -> Graph:
    """Raw splice at the 1-based vertex v (no eligibility check)."""
    return cuntz_splice_raw(g, v - 1)[0]


def cuntz_splice_multi(g: Graph, S) -> Graph:
    """Splice every vertex of the 1-based set S, in increasing order."""
    return _splice_multi(g, [s - 1 for s in sorted(S)])[0]


def _splice_multi(g: Graph, S0: Sequence[int]):
    mapping = list(range(g.n))
    new = {}
    for s in sorted(S0):
        g, mp = cuntz_splice_raw(g, mapping[s])
        mapping = [mp[x] for x in mapping]
        new = {k: (mp[a], mp[b]) for k, (a, b) in new.items()}
        at = max(x for x in range(g.n) if x not in mapping and x not in
                 {y for p in new.values() for y in p})
        new[s] = (at - 1, at)
    return g, mapping, new


def outsplit(g: Graph, w: int, classes: Sequence[Sequence]) -> tuple[Graph, list]:
    """Outsplit at 0-based w; copy k of w sits at position w + k."""
    k = len(classes)
    A = _insert_vertices(_rows(g), w + 1, k - 1)
    n2 = g.n + k - 1
    old = [_shift(x, w + 1, k - 1) for x in range(g.n)]
    copies = [w + t for t in range(k)]
    for x in range(g.n):
        if x == w:
            continue
        for t in copies[1:]:
            A[old[x]][t] = g.adj[x][w]
    for t, cls in zip(copies, classes):
        row = [0] * n2
        for y in range(g.n):
            if y == w:
                for c in copies:
                    row[c] = cls[w]
            else:
                row[old[y]] = cls[y]
        A[t] = row
    return Graph.from_rows(A), old


def insplit(g: Graph, w: int, classes: Sequence[Sequence]) -> tuple[Graph, list]:
    """Insplit at 0-based w; classes split the column of w by source."""
    k = len(classes)
    A = _insert_vertices(_rows(g), w + 1, k - 1)
    old = [_shift(x, w + 1, k - 1) for x in range(g.n)]
    copies = [w + t for t in range(k)]
    for t in copies[1:]:
        for y in range(g.n):
            if y != w:
                A[t][old[y]] = g.adj[w][y]
    for t, cls in zip(copies, classes):
        for x in range(g.n):
            if x == w:
                for c in copies:
                    A[c][t] = cls[w]
            else:
                A[old[x]][t] = cls[x]
    return Graph.from_rows(A), old


def collapse(g: Graph, v: int) -> Graph:
    A = _rows(g)
    n = g.n
    out = [[A[x][y] + A[x][v] * A[v][y] for y in range(n)] for x in range(n)]
    return Graph.from_rows(_delete(out, v))


def edge_expand_raw(g: Graph, u: int, x: int, at: int | None = None) -> tuple[Graph, list, int]:
    """Replace one edge u -> x by u -> z -> x; z goes to position at."""
    if at is None:
        at = component_end0(g, x) + 1
    A = _insert_vertices(_rows(g), at, 1)
    u2, x2 = _shift(u, at, 1), _shift(x, at, 1)
    A[u2][x2] = A[u2][x2] - 1
    A[u2][at] = 1
    A[at][x2] = 1
    return Graph.from_rows(A), [_shift(y, at, 1) for y in range(g.n)], at


def _graph_from_b(B: list[list]) -> Graph:
    A = [list(r) for r in B]
    for i in range(len(A)):
        A[i][i] = A[i][i] + 1
    for r in A:
        for x in r:
            if x is not INF and x < 0:
                raise IllegalAddition("the result has a negative edge count")
    return Graph.from_rows(A)


def _col_add(g: Graph, u: int, v: int, c: int) -> Graph:
    B = b_matrix(g)
    for r in B:
        if r[u] is INF:
            if c < 0:
                raise IllegalAddition("cannot subtract an infinite column entry")
            r[v] = INF
        else:
            r[v] = r[v] + c * r[u]
    return _graph_from_b(B)


def _row_add(g: Graph, u: int, v: int, c: int) -> Graph:
    B = b_matrix(g)
    B[u] = [a + c * b for a, b in zip(B[u], B[v])]
    return _graph_from_b(B)


# ---------------------------------------------------------------------------
# legality


def col_add_legal(g: Graph, u: int, v: int) -> str | None:
    """Reason the addition of column u into column v is illegal, else None."""
    if u == v:
        return "u and v must be distinct"
    if not reachability0(g)[u][v]:
        return "no path from u to v"
    if g.adj[u][u] != 0:
        return None
    s = g.row_sum(u)
    if g.adj[u][v] != 0 and (s is INF or s >= 2):
        return None
    return "u supports no loop, and lacks an edge to v or a second edge"


def row_add_legal(g: Graph, u: int, v: int) -> str | None:
    if u == v:
        return "u and v must be distinct"
    if not reachability0(g)[u][v]:
        return "no path from u to v"
    if not g.is_regular0(v):
        return "v is not regular"
    if not g.is_regular0(u):
        return "u is not regular"
    if g.adj[v][v] != 0 or g.adj[u][v] != 0:
        return None
    return "v supports no loop and there is no edge from u to v"


def _check_same_structure(g: Graph, h: Graph, what: str):
    if components(g) != components(h):
        raise IllegalAddition(f"{what} changes the component structure")


# ---------------------------------------------------------------------------
# apply


def apply_move_tracked(g: Graph, m: MoveSpec) -> tuple[Graph, list]:
    """Apply a move; also return where each old 0-based vertex went (None if
    removed)."""
    k = m.kind
    n = g.n
    u = None if m.u is None else m.u - 1
    v = None if m.v is None else m.v - 1
    for x in (u, v):
        if x is not None and not 0 <= x < n:
            raise IneligibleMove("vertex out of range")
    ident = list(range(n))
    if k == "S":
        if not g.is_regular0(u):
            raise IneligibleMove("S: vertex is not regular")
        if g.predecessors0(u):
            raise IneligibleMove("S: vertex is not a source")
        if n == 1:
            raise IneligibleMove("S: cannot remove the only vertex")
        A = _delete(_rows(g), u)
        return Graph.from_rows(A), [None if x == u else x - (x > u) for x in ident]
    if k == "R":
        w = u
        if not g.is_regular0(w):
            raise IneligibleMove("R: vertex is not regular")
        preds = g.predecessors0(w)
        if len(preds) != 1:
            raise IneligibleMove("R: edges into w must come from a single vertex")
        if g.row_sum(w) != 1:
            raise IneligibleMove("R: w must emit exactly one edge")
        y = g.successors0(w)[0]
        if y == w:
            raise IneligibleMove("R: the edge out of w is a loop")
        x = preds[0]
        A = _rows(g)
        A[x][y] = A[x][y] + A[x][w]
        A[x][w] = 0
        return Graph.from_rows(_delete(A, w)), [None if z == w else z - (z > w) for z in ident]
    if k == "O":
        w = u
        part = m.partition
        if g.row_sum(w) == 0:
            raise IneligibleMove("O: vertex is a sink")
        _check_partition(part, list(g.adj[w]), "O")
        if sum(1 for cls in part if any(x is INF for x in cls)) > 1:
            raise IneligibleMove("O: at most one class may be infinite")
        return outsplit(g, w, part)
    if k == "I":
        w = u
        part = m.partition
        if not g.is_regular0(w):
            raise IneligibleMove("I: vertex is not regular")
        if not g.predecessors0(w):
            raise IneligibleMove("I: vertex is a source")
        col = [g.adj[x][w] for x in range(n)]
        _check_partition(part, col, "I")
        if any(x is INF for cls in part for x in cls):
            raise IneligibleMove("I: classes must be finite")
        return insplit(g, w, part)
    if k == "Col":
        if not g.is_regular0(u):
            raise IneligibleMove("Col: vertex is not regular")
        if g.adj[u][u] != 0:
            raise IneligibleMove("Col: vertex supports a loop")
        if n == 1:
            raise IneligibleMove("Col: cannot collapse the only vertex")
        return collapse(g, u), [None if x == u else x - (x > u) for x in ident]
    if k == "C":
        if not g.is_regular0(u):
            raise IneligibleMove("C: vertex is not regular")
        if return_path_counts0(g)[u] < 2:
            raise IneligibleMove("C: vertex does not support two return paths")
        return cuntz_splice_raw(g, u)
    if k == "P":
        h, mapping, _ = _move_p(g, u)
        return h, mapping
    if k in ("ColAdd", "ColSub"):
        if k == "ColAdd":
            why = col_add_legal(g, u, v)
            if why:
                raise IllegalAddition(f"ColAdd: {why}")
            return _col_add(g, u, v, 1), ident
        h = _col_add(g, u, v, -1)
        why = col_add_legal(h, u, v)
        if why:
            raise IllegalAddition(f"ColSub: undoing addition illegal: {why}")
        return h, ident
    if k in ("RowAdd", "RowSub"):
        if k == "RowAdd":
            why = row_add_legal(g, u, v)
            if why:
                raise IllegalAddition(f"RowAdd: {why}")
            return _row_add(g, u, v, 1), ident
        if not g.is_regular0(u) or not g.is_regular0(v):
            raise IllegalAddition("RowSub: rows must be regular")
        h = _row_add(g, u, v, -1)
        why = row_add_legal(h, u, v)
        if why:
            raise IllegalAddition(f"RowSub: undoing addition illegal: {why}")
        return h, ident
    if k == "EdgeExpand":
        why = edge_expand_problem(g, u, v)
        if why:
            raise IneligibleMove(f"EdgeExpand: {why}")
        h, mapping, _ = edge_expand_raw(g, u, v)
        return h, mapping
    if k == "Relabel":
        perm = [p - 1 for p in m.perm]
        if sorted(perm) != ident:
            raise IneligibleMove("Relabel: not a permutation")
        h = Graph.from_rows([[g.adj[i][j] for j in perm] for i in perm])
        inv = [0] * n
        for new, old in enumerate(perm):
            inv[old] = new
        return h, inv
    raise IneligibleMove(f"unknown move {k}")


def apply_move(g: Graph, m: MoveSpec) -> Graph:
    return apply_move_tracked(g, m)[0]


def _check_partition(part, total: list, tag: str):
    if not part:
        raise IneligibleMove(f"{tag}: empty partition")
    for cls in part:
        if len(cls) != len(total):
            raise IneligibleMove(f"{tag}: class has the wrong length")
        if all(x == 0 for x in cls):
            raise IneligibleMove(f"{tag}: classes must be nonempty")
    for j, t in enumerate(total):
        s = 0
        for cls in part:
            s = s + cls[j]
        if s != t:
            raise IneligibleMove(f"{tag}: classes do not sum to the edge counts")


def edge_expand_problem(g: Graph, u: int, x: int) -> str | None:
    if g.adj[u][x] == 0:
        return "no edge"
    if g.adj[u][x] is INF:
        return "edge count is infinite"
    if not reachability0(g)[x][u]:
        return "edge does not lie on a cycle"
    return None


# ---------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class TraceStep:
    move: MoveSpec
    pre: str
    post: str
    witness: EquivWitness | None = None


@dataclass
class MoveTrace:
    start: Graph
    steps: list = field(default_factory=list)
    end: Graph | None = None

    def __post_init__(self):
        if self.end is None:
            self.end = self.start

    def push(self, move: MoveSpec, witness: EquivWitness | None = None) -> Graph:
        new = apply_move(self.end, move)
        self.steps.append(TraceStep(move, self.end.digest(), new.digest(), witness))
        self.end = new
        return new

    def record(self, move: MoveSpec, new: Graph, witness: EquivWitness | None = None):
        self.steps.append(TraceStep(move, self.end.digest(), new.digest(), witness))
        self.end = new

    def extend(self, other: "MoveTrace"):
        if other.start.digest() != self.end.digest():
            raise ValueError("traces do not compose")
        self.steps.extend(other.steps)
        self.end = other.end

    def __len__(self):
        return len(self.steps)

    def replay(self) -> Graph:
        g = self.start
        for st in self.steps:
            if g.digest() != st.pre:
                raise ValueError(f"pre-graph hash mismatch at {st.move}")
            g = apply_move(g, st.move)
            if g.digest() != st.post:
                raise ValueError(f"post-graph hash mismatch at {st.move}")
        return g

    def to_json(self) -> dict:
        return {
            "start": _graph_json(self.start),
            "end": _graph_json(self.end),
            "steps": [{"move": s.move.to_json(), "pre": s.pre, "post": s.post,
                       "witness": s.witness.to_json() if s.witness else None}
                      for s in self.steps],
        }


def _graph_json(g: Graph) -> list:
    return [[ext_to_json(x) for x in r] for r in g.adj]


# ---------------------------------------------------------------------------
# witnesses


def _positions(bg: BlockedGraphForm):
    rows = bg.regular_rows()
    return {v: i for i, v in enumerate(rows)}


def row_col_add(bg: BlockedGraphForm, u: int, v: int, side: str,
                sign: int = 1) -> tuple[Graph, EquivWitness]:
    """Row or column addition (subtraction when sign is -1) on 1-based u, v.

    side "col": column u is added into column v.  side "row": row v is added
    into row u.  The component structure must be unchanged.
    """
    g = bg.graph
    kind = {("col", 1): "ColAdd", ("col", -1): "ColSub",
            ("row", 1): "RowAdd", ("row", -1): "RowSub"}[(side, sign)]
    h = apply_move(g, MoveSpec(kind, u, v))
    _check_same_structure(g, h, kind)
    B = bg.bullet()
    m, n = B.M.shape
    if side == "col":
        U = im.identity(m)
        V = im.elementary(n, u - 1, v - 1, sign)
    else:
        pos = _positions(bg)
        U = im.elementary(m, pos[u - 1], pos[v - 1], sign)
        V = im.identity(n)
    target = blocked(h).bullet()
    return h, EquivWitness(U, V, B, target)


def edge_expand(bg: BlockedGraphForm, u: int, x: int) -> tuple[Graph, EquivWitness]:
    """Expand one edge u -> x on a cycle; the new vertex ends x's block."""
    g = bg.graph
    u0, x0 = u - 1, x - 1
    why = edge_expand_problem(g, u0, x0)
    if why:
        raise IneligibleMove(f"EdgeExpand: {why}")
    if not g.is_regular0(u0):
        raise IneligibleMove("EdgeExpand: source of the edge must be regular")
    h, mapping, z = edge_expand_raw(g, u0, x0)
    bh = blocked(h)
    j = bg.block_of[x0]
    r = [0] * bg.N
    r[j] = 1
    src = neg_iota(bg.bullet(), r)
    tgt = bh.bullet()
    m, n = tgt.M.shape
    pos = _positions(bh)
    U = im.elementary(m, pos[mapping[u0]], pos[z], -1)
    V = im.elementary(n, z, mapping[x0], -1)
    return h, EquivWitness(U, V, src, tgt)


def _require_splice_vertex(bg: BlockedGraphForm, u0: int):
    g = bg.graph
    if bg.level < 3:
        raise IneligibleMove("graph must be in triple-circle form")
    if not g.is_regular0(u0):
        raise IneligibleMove("vertex is not regular")
    if return_path_counts0(g)[u0] < 2:
        raise IneligibleMove("vertex does not support two return paths")


def cuntz_splice_twice_witness(bg: BlockedGraphForm, u: int) -> tuple[Graph, EquivWitness]:
    """E_{u,--} with the SL witness from -iota_{4e_j}(-B) to its bullet matrix."""
    g = bg.graph
    u0 = u - 1
    _require_splice_vertex(bg, u0)
    h1, mp1 = cuntz_splice_raw(g, u0)
    a = component_end0(h1, mp1[u0]) - 1
    h2, mp2 = cuntz_splice_raw(h1, a)
    uu = mp2[mp1[u0]]
    end = component_end0(h2, uu)
    new = [end - 3, end - 2, end - 1, end]
    bh = blocked(h2)
    j = bg.block_of[u0]
    r = [0] * bg.N
    r[j] = 4
    src = neg_iota(bg.bullet(), r)
    tgt = bh.bullet()
    m, n = tgt.M.shape
    pos = _positions(bh)
    U = im.identity(m)
    U[pos[uu], pos[new[1]]] = 1
    U[pos[new[0]], pos[new[3]]] = 1
    V = im.identity(n)
    V[new[0], uu] = -1
    core = [[0, -1, 0, 0], [-1, 0, 0, 0], [-1, 0, 0, -1], [0, 0, -1, 0]]
    for s in range(4):
        for t in range(4):
            V[new[s], new[t]] = core[s][t]
    return h2, EquivWitness(U, V, src, tgt)


def cuntz_splice_once_witness(bg: BlockedGraphForm, u: int) -> tuple[Graph, EquivWitness]:
    """E_{u,-} with a GL witness from -iota_{2e_j}(-B) having det V{j} = -1."""
    g = bg.graph
    u0 = u - 1
    _require_splice_vertex(bg, u0)
    h, mp = cuntz_splice_raw(g, u0)
    uu = mp[u0]
    end = component_end0(h, uu)
    n1, n2 = end - 1, end
    bh = blocked(h)
    j = bg.block_of[u0]
    r = [0] * bg.N
    r[j] = 2
    src = neg_iota(bg.bullet(), r)
    tgt = bh.bullet()
    m, n = tgt.M.shape
    pos = _positions(bh)
    U = im.elementary(m, pos[uu], pos[n2], 1)
    Va = im.identity(n)
    Va[n1, n1] = 0
    Va[n2, n2] = 0
    Va[n1, n2] = -1
    Va[n2, n1] = -1
    V = im.mul(Va, im.elementary(n, n2, uu, 1))
    return h, EquivWitness(U, V, src, tgt)


def cuntz_splice_step_witness(bg: BlockedGraphForm, u: int) -> tuple[Graph, Graph, EquivWitness]:
    """Witness from -iota_{2e_j}(-B_{E_{u,-}}) to B_{E_{u,--}}, obtained by
    composing the double-splice witness with the inverse single-splice one."""
    h1, w1 = cuntz_splice_once_witness(bg, u)
    h2, w2 = cuntz_splice_twice_witness(bg, u)
    j = bg.block_of[u - 1]
    r = [0] * bg.N
    r[j] = 2
    inv = w1.inverse()
    Ui = _pad_square(inv.U, w1.target.poset, w1.target.m, r)
    Vi = _pad_square(inv.V, w1.target.poset, w1.target.n, r)
    src = neg_iota(w1.target, r)
    return h1, h2, EquivWitness(im.mul(w2.U, Ui), im.mul(Vi, w2.V), src, w2.target)


def _pad_square(M: np.ndarray, poset, sizes, r) -> np.ndarray:
    from .blocks import iota_r
    return iota_r(square(poset, sizes, M), r).M


def _move_p(g: Graph, u0: int):
    rep = moveP_eligible(g, u0 + 1)
    if not rep.eligible:
        raise IneligibleMove("P: " + "; ".join(c.name for c in rep.failed()))
    S0 = [w - 1 for w in rep.targets]
    h, mapping, new = _splice_multi(g, S0)
    A = _rows(h)
    uu = mapping[u0]
    for w in S0:
        v2 = new[w][1]
        A[uu][v2] = 2 * g.adj[u0][w]
    return Graph.from_rows(A), mapping, new


def move_p(g: Graph, u: int) -> Graph:
    return _move_p(g, u - 1)[0]


def move_p_witness(bg: BlockedGraphForm, u: int) -> tuple[Graph, Graph, EquivWitness]:
    """(E_{u,P}, E_{S,-}, witness from B_{E_{u,P}} to B_{E_{S,-}})."""
    g = bg.graph
    u0 = u - 1
    hp, mapping, new = _move_p(g, u0)
    S0 = [w - 1 for w in moveP_eligible(g, u).targets]
    hs, _, _ = _splice_multi(g, S0)
    bp, bs = blocked(hp), blocked(hs)
    src, tgt = bp.bullet(), bs.bullet()
    m = src.M.shape[0]
    pos = _positions(bp)
    uu = mapping[u0]
    U = im.identity(m)
    U[pos[uu], pos[uu]] = -1
    for w in S0:
        U[pos[uu], pos[new[w][0]]] = 2 * g.adj[u0][w]
    V = im.identity(src.M.shape[1])
    return hp, hs, EquivWitness(U, V, src, tgt)


def hash_twice_graph(g: Graph, u0: int) -> tuple[Graph, list, dict]:
    """E_{u0,##} for 0-based u0; four new vertices follow each target's
    strongly connected set."""
    targets = [w for w in g.successors0(u0) if w != u0]
    mapping = list(range(g.n))
    new = {}
    h = g
    for w in sorted(targets):
        ww = mapping[w]
        at = component_end0(h, ww) + 1
        A = _insert_vertices(_rows(h), at, 4)
        mapping = [_shift(x, at, 4) for x in mapping]
        new = {k: tuple(_shift(y, at, 4) for y in t) for k, t in new.items()}
        ww = mapping[w]
        uu = mapping[u0]
        w1, w2, w3, w4 = at, at + 1, at + 2, at + 3
        for a in (w1, w2, w3, w4):
            A[a][a] += 1
        for a, b in ((w1, w2), (w2, w1), (w2, w3), (w3, w2), (w3, w4), (w4, w3)):
            A[a][b] += 1
        A[ww][w1] += 1
        A[w1][ww] += 1
        A[uu][w2] += 2
        A[uu][w4] += 2
        h = Graph.from_rows(A)
        new[w] = (w1, w2, w3, w4)
    return h, mapping, new


def pulelehua_twice_witness(bg: BlockedGraphForm, u0: int) -> tuple[Graph, EquivWitness]:
    g = bg.graph
    rep = assumption_hash_check(g, u0)
    if not rep.eligible:
        raise IneligibleMove("assumption fails: " + "; ".join(c.name for c in rep.failed()))
    i0 = u0 - 1
    h, mapping, new = hash_twice_graph(g, i0)
    bh = blocked(h)
    r = [0] * bg.N
    for w in new:
        r[bg.block_of[w]] += 4
    src = neg_iota(bg.bullet(), r)
    tgt = bh.bullet()
    m, n = tgt.M.shape
    pos = _positions(bh)
    U = im.identity(m)
    V = im.identity(n)
    core = [[0, -1, 0, 0], [-1, 0, 0, 0], [0, -1, 0, -1], [0, 0, -1, 0]]
    uu0 = mapping[i0]
    for w, (w1, w2, w3, w4) in new.items():
        ww = mapping[w]
        ws = (w1, w2, w3, w4)
        U[pos[ww], pos[w2]] = 1
        U[pos[w2], pos[w4]] = 1
        U[pos[uu0], pos[w3]] = 2
        V[w1, ww] = -1
        for s in range(4):
            for t in range(4):
                V[ws[s], ws[t]] = core[s][t]
    return h, EquivWitness(U, V, src, tgt)


def normalize_for_p(g: Graph, u: int) -> tuple[Graph, int, MoveTrace]:
    """Bring g to triple-circle block form while keeping the 1-based vertex u;
    returns the new graph, u's new label, and the trace."""
    from .blocks import block_form

    rep = moveP_eligible(g, u)
    if not rep.eligible:
        raise IneligibleMove("P: " + "; ".join(c.name for c in rep.failed()))
    bg, trace = block_form(g, 3, keep=u - 1)
    u2 = bg.vertex_order.index(u - 1) + 1
    rep = moveP_eligible(bg.graph, u2)
    if not rep.eligible:
        raise IneligibleMove("P after normalization: " + "; ".join(c.name for c in rep.failed()))
    return bg.graph, u2, trace
