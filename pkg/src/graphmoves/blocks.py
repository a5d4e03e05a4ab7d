"""Block matrices over a finite poset, the padding embedding, equivalence
checks, positivity classes, and the canonical / standard form drivers."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import intmat as im
from .graph_core import INF, Graph, b_matrix, positive_reach0
from .structure import ComponentPoset, Kind, components, form_level


class Poset:
    """Partial order on {0..N-1} given by a reflexive boolean matrix with
    i <= j in the order implying i <= j as integers."""

    __slots__ = ("leq",)

    def __init__(self, leq):
        leq = tuple(tuple(bool(x) for x in row) for row in leq)
        n = len(leq)
        for i in range(n):
            if not leq[i][i]:
                raise ValueError("poset relation must be reflexive")
            for j in range(n):
                if leq[i][j] and j < i:
                    raise ValueError("poset numbering must extend the order")
        self.leq = leq

    @classmethod
    def chain(cls, n: int) -> "Poset":
        return cls([[i <= j for j in range(n)] for i in range(n)])

    @classmethod
    def antichain(cls, n: int) -> "Poset":
        return cls([[i == j for j in range(n)] for i in range(n)])

    @property
    def size(self) -> int:
        return len(self.leq)

    def le(self, i: int, j: int) -> bool:
        return self.leq[i][j]

    def lt(self, i: int, j: int) -> bool:
        return i != j and self.leq[i][j]

    def down(self, i: int) -> list[int]:
        """Elements strictly below i in the order, i.e. j with j < i."""
        return [j for j in range(self.size) if self.lt(j, i)]

    def up(self, i: int) -> list[int]:
        return [j for j in range(self.size) if self.lt(i, j)]

    def immediate_up(self, i: int) -> list[int]:
        return [j for j in self.up(i) if not any(self.lt(i, k) and self.lt(k, j)
                                                 for k in range(self.size))]

    def immediate_down(self, i: int) -> list[int]:
        return [j for j in self.down(i) if i in self.immediate_up(j)]

    def __eq__(self, other):
        return isinstance(other, Poset) and self.leq == other.leq

    def __hash__(self):
        return hash(self.leq)

    def __repr__(self):
        return f"Poset({[list(r) for r in self.leq]})"

    def to_json(self):
        return [[int(x) for x in r] for r in self.leq]


def offsets(sizes: Sequence[int]) -> list[int]:
    out = [0]
    for s in sizes:
        out.append(out[-1] + s)
    return out


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    poset: Poset
    m: tuple[int, ...]
    n: tuple[int, ...]
    M: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(int(x) for x in self.m))
        object.__setattr__(self, "n", tuple(int(x) for x in self.n))
        if len(self.m) != self.poset.size or len(self.n) != self.poset.size:
            raise ValueError("multiindex length differs from poset size")
        if self.M.shape != (sum(self.m), sum(self.n)):
            raise ValueError(f"matrix shape {self.M.shape} does not match multiindices")

    @property
    def N(self) -> int:
        return self.poset.size

    def rows_of(self, i: int) -> range:
        o = offsets(self.m)
        return range(o[i], o[i + 1])

    def cols_of(self, j: int) -> range:
        o = offsets(self.n)
        return range(o[j], o[j + 1])

    def block(self, i: int, j: int) -> np.ndarray:
        r, c = self.rows_of(i), self.cols_of(j)
        return self.M[r.start:r.stop, c.start:c.stop]

    def sub(self, idx: Sequence[int]) -> np.ndarray:
        """B{c} for a set c of block indices, in increasing order."""
        idx = sorted(idx)
        rows = [r for i in idx for r in self.rows_of(i)]
        cols = [c for j in idx for c in self.cols_of(j)]
        if not rows or not cols:
            return im.zeros(len(rows), len(cols))
        return self.M[np.ix_(rows, cols)]

    def is_member(self) -> bool:
        for i in range(self.N):
            for j in range(self.N):
                if not self.poset.le(i, j) and any(x != 0 for x in self.block(i, j).flat):
                    return False
        return True

    def with_matrix(self, M: np.ndarray) -> "BlockMatrix":
        return BlockMatrix(self.poset, self.m, self.n, M)

    def __eq__(self, other):
        return (isinstance(other, BlockMatrix) and self.poset == other.poset
                and self.m == other.m and self.n == other.n and im.equal(self.M, other.M))

    def to_json(self) -> dict:
        return {"poset": self.poset.to_json(), "m": list(self.m), "n": list(self.n),
                "shape": list(self.M.shape), "entries": im.to_lists(self.M)}

    @classmethod
    def from_json(cls, d) -> "BlockMatrix":
        return cls(Poset(d["poset"]), tuple(d["m"]), tuple(d["n"]),
                   im.mat(d["entries"], tuple(d["shape"])))


def square(poset: Poset, m: Sequence[int], M: np.ndarray) -> BlockMatrix:
    return BlockMatrix(poset, tuple(m), tuple(m), M)


def pad_index(sizes: Sequence[int], r: Sequence[int]) -> list[int]:
    """Positions of the old coordinates inside the padded coordinate list."""
    out = []
    o = 0
    for s, k in zip(sizes, r):
        out.extend(range(o, o + s))
        o += s + k
    return out


def iota_r(B: BlockMatrix, r: Sequence[int], fill: int = 1) -> BlockMatrix:
    """Append an r_i x r_i identity (times ``fill``) to each diagonal block."""
    r = tuple(int(x) for x in r)
    m2 = tuple(a + b for a, b in zip(B.m, r))
    n2 = tuple(a + b for a, b in zip(B.n, r))
    M = im.zeros(sum(m2), sum(n2))
    ri = pad_index(B.m, r)
    ci = pad_index(B.n, r)
    if ri and ci:
        M[np.ix_(ri, ci)] = B.M
    ro, co = offsets(m2), offsets(n2)
    for i, k in enumerate(r):
        for t in range(k):
            M[ro[i] + B.m[i] + t, co[i] + B.n[i] + t] = fill
    return BlockMatrix(B.poset, m2, n2, M)


def neg_iota(B: BlockMatrix, r: Sequence[int]) -> BlockMatrix:
    """-iota_r(-B): pad with -1 on the new diagonal."""
    return iota_r(B, r, fill=-1)


class Verdict(str, Enum):
    SLP = "SLP"
    GLP = "GLP"
    NEITHER = "neither"


@dataclass(frozen=True)
class EquivReport:
    verdict: Verdict
    row_dets: tuple[int, ...]
    col_dets: tuple[int, ...]
    reason: str = ""


def verify_equiv(U: np.ndarray, B: BlockMatrix, V: np.ndarray, B2: BlockMatrix) -> EquivReport:
    if B.poset != B2.poset or B.m != B2.m or B.n != B2.n:
        raise ValueError("source and target block structures differ")
    if U.shape != (sum(B.m), sum(B.m)) or V.shape != (sum(B.n), sum(B.n)):
        raise ValueError("witness dimensions do not match")
    Ub = square(B.poset, B.m, U)
    Vb = square(B.poset, B.n, V)
    rd = tuple(im.det(Ub.block(i, i)) for i in range(B.N))
    cd = tuple(im.det(Vb.block(i, i)) for i in range(B.N))
    if not Ub.is_member() or not Vb.is_member():
        return EquivReport(Verdict.NEITHER, rd, cd, "witness is not block upper triangular")
    if any(abs(d) != 1 for d in rd + cd):
        return EquivReport(Verdict.NEITHER, rd, cd, "a diagonal block is not invertible")
    if not im.equal(im.mul(U, B.M, V), B2.M):
        return EquivReport(Verdict.NEITHER, rd, cd, "U B V differs from the target")
    if all(d == 1 for d in rd + cd):
        return EquivReport(Verdict.SLP, rd, cd)
    return EquivReport(Verdict.GLP, rd, cd)


@dataclass(frozen=True, eq=False)
class EquivWitness:
    """(U, V) with U @ source @ V == target; source and target are kept."""

    U: np.ndarray
    V: np.ndarray
    source: BlockMatrix
    target: BlockMatrix

    def check(self) -> EquivReport:
        return verify_equiv(self.U, self.source, self.V, self.target)

    @classmethod
    def identity(cls, B: BlockMatrix) -> "EquivWitness":
        return cls(im.identity(B.M.shape[0]), im.identity(B.M.shape[1]), B, B)

    def then(self, other: "EquivWitness", r: Sequence[int] | None = None) -> "EquivWitness":
        """Compose with ``other`` whose source is -iota_r(-self.target)."""
        if r is None:
            r = [a - b for a, b in zip(other.source.n, self.target.n)]
        pad = neg_iota(self.target, r)
        if not (pad == other.source):
            raise ValueError("witnesses do not compose")
        Ur = iota_r(square(self.source.poset, self.source.m, self.U), r).M
        Vr = iota_r(square(self.source.poset, self.source.n, self.V), r).M
        src = neg_iota(self.source, r)
        return EquivWitness(im.mul(other.U, Ur), im.mul(Vr, other.V), src, other.target)

    def inverse(self) -> "EquivWitness":
        return EquivWitness(im.inverse_unimodular(self.U), im.inverse_unimodular(self.V),
                            self.target, self.source)

    def to_json(self) -> dict:
        return {"U": im.to_lists(self.U), "V": im.to_lists(self.V),
                "U_shape": list(self.U.shape), "V_shape": list(self.V.shape),
                "source": self.source.to_json(), "target": self.target.to_json()}

    @classmethod
    def from_json(cls, d) -> "EquivWitness":
        return cls(im.mat(d["U"], tuple(d["U_shape"])), im.mat(d["V"], tuple(d["V_shape"])),
                   BlockMatrix.from_json(d["source"]), BlockMatrix.from_json(d["target"]))


def mplus_check(B: BlockMatrix, detail: bool = False):
    """Membership in the positive class.

    Off-diagonal blocks above the diagonal are positive whenever the order
    relation holds; m_i = 0 forces n_i = 1; m_i = 1 forces n_i = 1 and a zero
    block; m_i > 1 forces a positive block, m_i, n_i >= 3 and two unit
    invariant factors.
    """
    fails = []
    if not B.is_member():
        fails.append("not block upper triangular")
    for i in range(B.N):
        for j in range(B.N):
            if B.poset.lt(i, j):
                blk = B.block(i, j)
                if blk.size and any(x <= 0 for x in blk.flat):
                    fails.append(f"block ({i + 1},{j + 1}) not positive")
    for i in range(B.N):
        mi, ni = B.m[i], B.n[i]
        blk = B.block(i, i)
        if mi == 0 and ni != 1:
            fails.append(f"block {i + 1}: m=0 needs n=1")
        elif mi == 1 and (ni != 1 or blk[0, 0] != 0):
            fails.append(f"block {i + 1}: m=1 needs the 1x1 zero block")
        elif mi > 1:
            if any(x <= 0 for x in blk.flat):
                fails.append(f"block {i + 1} not positive")
            if mi < 3 or ni < 3:
                fails.append(f"block {i + 1} smaller than 3")
            if im.smith_normal_form(blk).factors.count(1) < 2:
                fails.append(f"block {i + 1} lacks two unit invariant factors")
    if detail:
        return fails
    return not fails


# ---------------------------------------------------------------------------
# graphs in block form


@dataclass(frozen=True, eq=False)
class BlockedGraphForm:
    """A graph whose vertices are listed block by block in poset order.

    ``vertex_order[k]`` is the 0-based vertex of the graph handed to
    ``block_form`` that became vertex k, or None for a vertex created by a
    move.
    """

    graph: Graph
    cp: ComponentPoset
    block_of: tuple[int, ...]
    level: int
    vertex_order: tuple = ()

    @property
    def poset(self) -> Poset:
        return Poset(self.cp.leq)

    @property
    def N(self) -> int:
        return self.cp.size

    def block_vertices(self, i: int) -> list[int]:
        return [v for v in range(self.graph.n) if self.block_of[v] == i]

    @property
    def n_index(self) -> tuple[int, ...]:
        return tuple(len(self.block_vertices(i)) for i in range(self.N))

    @property
    def m_index(self) -> tuple[int, ...]:
        return tuple(sum(1 for v in self.block_vertices(i) if self.graph.is_regular0(v))
                     for i in range(self.N))

    def regular_rows(self) -> list[int]:
        return [v for v in range(self.graph.n) if self.graph.is_regular0(v)]

    def bullet(self) -> BlockMatrix:
        B = b_matrix(self.graph)
        rows = self.regular_rows()
        M = im.mat([[B[r][c] for c in range(self.graph.n)] for r in rows],
                   (len(rows), self.graph.n))
        return BlockMatrix(self.poset, self.m_index, self.n_index, M)

    def row_position(self, v: int) -> int:
        """Row index of the regular 0-based vertex v inside the bullet matrix."""
        return self.regular_rows().index(v)


def blocked(g: Graph, vertex_order: Sequence | None = None) -> BlockedGraphForm:
    """Wrap a graph already listed block by block.

    Raises ValueError when the vertices are not contiguous per block, not in
    poset order, or singular vertices do not lead their block.
    """
    lvl = form_level(g)
    if lvl == 0:
        raise ValueError("graph is not in block form")
    cp = components(g)
    block_of = _assign_blocks(g, cp)
    prev = -1
    for v in range(g.n):
        if block_of[v] < prev:
            raise ValueError("vertices are not listed block by block")
        prev = block_of[v]
    for i in range(cp.size):
        vs = [v for v in range(g.n) if block_of[v] == i]
        regs = [g.is_regular0(v) for v in vs]
        if regs != sorted(regs):
            raise ValueError("singular vertices must come first in each block")
    if vertex_order is None:
        vertex_order = tuple(range(g.n))
    return BlockedGraphForm(g, cp, tuple(block_of), lvl, tuple(vertex_order))


def _assign_blocks(g: Graph, cp: ComponentPoset) -> list[int]:
    out = list(cp.index)
    for _ in range(g.n):
        for t in cp.transition0:
            if out[t] is None:
                succ = g.successors0(t)
                if len(succ) == 1 and out[succ[0]] is not None:
                    out[t] = out[succ[0]]
    if any(x is None for x in out):
        raise ValueError("transition state without a unique path into a component")
    return out


def block_order(g: Graph) -> list[int]:
    """Vertex order that lists blocks in poset order, singular vertices first
    in each block, then by original index."""
    cp = components(g)
    bo = _assign_blocks(g, cp)
    return sorted(range(g.n), key=lambda v: (bo[v], g.is_regular0(v), v))


# ---------------------------------------------------------------------------
# block form


def _infinite_split(g: Graph) -> int | None:
    for i in range(g.n):
        if g.row_sum(i) is INF and any(x not in (0, INF) for x in g.adj[i]):
            return i
    return None


def block_form(g: Graph, level: int = 3, keep: int | None = None):
    """Move g into the requested block form.

    Returns ``(bg, trace)``.  ``keep`` is a 0-based vertex that must survive;
    ``bg.vertex_order`` records where every surviving input vertex went.
    """
    from .moves import MoveSpec, MoveTrace, apply_move_tracked

    if level not in (1, 2, 3):
        raise ValueError("level must be 1, 2 or 3")
    trace = MoveTrace(g)
    origin: list = list(range(g.n))

    def step(m: MoveSpec):
        nonlocal origin
        h, mp = apply_move_tracked(trace.end, m)
        new = [None] * h.n
        for old, pos in enumerate(mp):
            if pos is not None and new[pos] is None:
                new[pos] = origin[old]
        origin = new
        trace.record(m, h)

    while True:
        cur = trace.end
        w = _infinite_split(cur)
        if w is not None:
            fin = tuple(0 if x is INF else x for x in cur.adj[w])
            inf = tuple(INF if x is INF else 0 for x in cur.adj[w])
            step(MoveSpec("O", w + 1, partition=(fin, inf)))
            continue
        srcs = [v for v in range(cur.n) if cur.is_regular0(v) and not cur.predecessors0(v)
                and cur.n > 1 and origin[v] != keep]
        if srcs:
            step(MoveSpec("S", srcs[0] + 1))
            continue
        cp = components(cur)
        ts = [t for t in cp.transition0 if origin[t] != keep and cur.adj[t][t] == 0
              and (level >= 2 or cur.row_sum(t) != 1)]
        if ts and cur.n > 1:
            step(MoveSpec("Col", ts[-1] + 1))
            continue
        if level == 3:
            cands = []
            for c, k in zip(cp.comps, cp.kinds):
                if k == Kind.CYCLIC and len(c) > 1:
                    cands.extend(v for v in c if cur.is_regular0(v) and origin[v] != keep)
            if cands:
                step(MoveSpec("Col", max(cands) + 1))
                continue
        break
    cur = trace.end
    order = block_order(cur)
    if order != list(range(cur.n)):
        step(MoveSpec("Relabel", perm=tuple(o + 1 for o in order)))
    return blocked(trace.end, origin), trace


# ---------------------------------------------------------------------------
# canonical form


CANONICAL_CONDITIONS = (
    "loops and infinite emission",
    "paths through regular vertices",
    "noncyclic blocks have at least three regular vertices",
    "positivity",
    "two unit invariant factors",
    "singular vertices first",
)


@dataclass(frozen=True)
class CanonicalReport:
    results: tuple

    @property
    def ok(self) -> bool:
        return all(p for _, p, _ in self.results)

    def failed(self) -> list[int]:
        return [k + 1 for k, (_, p, _) in enumerate(self.results) if not p]

    def to_json(self) -> dict:
        return {"ok": self.ok,
                "conditions": [{"index": k + 1, "name": n, "passed": p, "detail": d}
                               for k, (n, p, d) in enumerate(self.results)]}


def canonical_check(bg: BlockedGraphForm) -> CanonicalReport:
    g = bg.graph
    n = g.n
    P = positive_reach0(g)
    R = [[P[u][v] or u == v for v in range(n)] for u in range(n)]
    c1 = []
    for v in range(n):
        if g.is_regular0(v):
            if g.adj[v][v] == 0:
                c1.append(v + 1)
        elif any(P[v][w] and g.adj[v][w] is not INF for w in range(n)):
            c1.append(v + 1)
    c2 = []
    regs = [v for v in range(n) if g.is_regular0(v)]
    rset = set(regs)
    for v in regs:
        seen = {v}
        stack = [v]
        while stack:
            x = stack.pop()
            for y in g.successors0(x):
                if y in rset and y not in seen:
                    seen.add(y)
                    stack.append(y)
        c2.extend((v + 1, w + 1) for w in regs if R[v][w] and w not in seen)
    c3, c4, c5, c6 = [], [], [], []
    B = bg.bullet()
    for i in range(bg.N):
        kind = bg.cp.kinds[i]
        if kind == Kind.NONCYCLIC and B.m[i] < 3:
            c3.append(i + 1)
        if B.m[i] > 1 and im.smith_normal_form(B.block(i, i)).factors.count(1) < 2:
            c5.append(i + 1)
        for j in range(bg.N):
            if not B.poset.le(i, j):
                continue
            blk = B.block(i, j)
            if blk.size == 0 or (i == j and B.m[i] <= 1):
                continue
            if any(x <= 0 for x in blk.flat):
                c4.append((i + 1, j + 1))
        vs = bg.block_vertices(i)
        regs_i = [g.is_regular0(v) for v in vs]
        if regs_i != sorted(regs_i):
            c6.append(i + 1)
    fails = [c1, c2, c3, c4, c5, c6]
    return CanonicalReport(tuple((name, not f, f) for name, f in
                                 zip(CANONICAL_CONDITIONS, fails)))


MAX_EXPANSIONS = 5


def _unit_count(bg: BlockedGraphForm, i: int) -> int:
    return im.smith_normal_form(bg.bullet().block(i, i)).factors.count(1)


def _reblock(h: Graph, origin) -> BlockedGraphForm:
    return blocked(h, origin)


def _split_singular_block(bg: BlockedGraphForm, i: int):
    """A noncyclic block with no regular vertex: outsplit one singular vertex
    so that a single edge leaves from a new regular copy placed at the block
    end.  Returns the new form, the moves, and a witness from
    -iota_{e_i}(-B) to the new bullet matrix."""
    from .moves import MoveSpec, apply_move_tracked

    g = bg.graph
    vs = bg.block_vertices(i)
    v = vs[0]
    inside = [w for w in vs if g.adj[v][w] != 0]
    others = [w for w in inside if w != v]
    w = others[0] if others else inside[0]
    one = tuple(1 if y == w else 0 for y in range(g.n))
    rest = tuple(g.adj[v])
    moves = [MoveSpec("O", v + 1, partition=(rest, one))]
    h, mp = apply_move_tracked(g, moves[0])
    z = v + 1
    end = max(max(mp[x] for x in vs), z)
    perm = list(range(h.n))
    perm.remove(z)
    perm.insert(end, z)
    if perm != list(range(h.n)):
        mv = MoveSpec("Relabel", perm=tuple(p + 1 for p in perm))
        moves.append(mv)
        h2, mp2 = apply_move_tracked(h, mv)
        mp = [mp2[x] for x in mp]
        z = mp2[z]
        h = h2
    origin = [None] * h.n
    for old, pos in enumerate(mp):
        origin[pos] = bg.vertex_order[old]
    bh = blocked(h, origin)
    r = [0] * bg.N
    r[i] = 1
    src = neg_iota(bg.bullet(), r)
    tgt = bh.bullet()
    V = im.mul(im.elementary(h.n, z, mp[w], -1), im.elementary(h.n, mp[v], z, 1))
    U = im.identity(tgt.M.shape[0])
    return bh, moves, EquivWitness(U, V, src, tgt)


def _expand_block(bg: BlockedGraphForm, i: int):
    from .moves import MoveSpec, edge_expand

    g = bg.graph
    vs = bg.block_vertices(i)
    for x in vs:
        if not g.is_regular0(x):
            continue
        for y in vs:
            if g.adj[x][y] != 0:
                h, wit = edge_expand(bg, x + 1, y + 1)
                end = max(vs)
                origin = list(bg.vertex_order)
                origin.insert(end + 1, None)
                return blocked(h, origin), MoveSpec("EdgeExpand", x + 1, y + 1), wit
    raise ValueError("no regular edge inside the block")


def _col_step(state, c: int, v: int):
    from .moves import MoveSpec, row_col_add

    bg, trace, wit = state
    h, w = row_col_add(bg, c + 1, v + 1, "col")
    trace.record(MoveSpec("ColAdd", c + 1, v + 1), h, w)
    bh = blocked(h, bg.vertex_order)
    return bh, trace, wit.then(w, [0] * bg.N)


def canonical_form(g: Graph, min_sizes: Sequence[int] | None = None):
    """Return ``(F, trace, witness)``.

    The witness is an SL equivalence from -iota_r(-B) of the block form of g
    (g itself when g is already in triple-circle block order) to B_F.
    ``min_sizes`` asks for at least that many regular vertices per noncyclic
    block.
    """

    bg, trace = block_form(g, 3)
    start = bg.bullet()
    wit = EquivWitness.identity(start)
    state = (bg, trace, wit)

    # sizes and unit invariant factors
    for i in range(bg.N):
        bg, trace, wit = state
        if bg.cp.kinds[i] != Kind.NONCYCLIC:
            continue
        want = 3 if min_sizes is None else max(3, min_sizes[i])
        count = 0
        while True:
            bg, trace, wit = state
            m = bg.m_index[i]
            if m >= want and _unit_count(bg, i) >= 2:
                break
            if count >= MAX_EXPANSIONS + max(0, want - 3):
                raise RuntimeError(f"block {i + 1} needs more than the allowed expansions")
            count += 1
            if m == 0:
                bh, moves, w = _split_singular_block(bg, i)
                for mv in moves[:-1]:
                    trace.record(mv, _apply(trace.end, mv), None)
                trace.record(moves[-1], bh.graph, w)
            else:
                bh, mv, w = _expand_block(bg, i)
                trace.record(mv, bh.graph, w)
            r = [0] * bg.N
            r[i] = 1
            state = (bh, trace, wit.then(w, r))

    return canonical_fixups(*state)


def canonical_fixups(bg: BlockedGraphForm, trace, wit: EquivWitness):
    """Loops in noncyclic blocks, then positivity column by column, using
    column additions only.  Extends ``trace`` and composes ``wit``."""
    state = (bg, trace, wit)
    for i in range(state[0].N):
        if state[0].cp.kinds[i] != Kind.NONCYCLIC:
            continue
        state = _loops(state, i)
    n = state[0].graph.n
    for v in range(n):
        state = _positive_column(state, v)
    return state


def _apply(h: Graph, mv) -> Graph:
    from .moves import apply_move
    return apply_move(h, mv)


def _loops(state, i: int):
    bg = state[0]
    g = bg.graph
    vs = bg.block_vertices(i)
    vset = set(vs)
    if not any(g.adj[x][x] != 0 for x in vs):
        u = next(x for x in vs if sum(1 for y in vs if g.adj[x][y] != 0) >= 2
                 or any(g.adj[x][y] not in (0, 1) for y in vs))
        v = next(y for y in vs if y != u and g.adj[u][y] != 0)
        path = _shortest_path(g, v, u, vset)
        for c in reversed(path[1:]):
            state = _col_step(state, c, v)
    while True:
        g = state[0].graph
        loopless = [x for x in vs if g.adj[x][x] == 0]
        if not loopless:
            return state
        for x in loopless:
            ys = [y for y in vs if g.adj[x][y] != 0 and g.adj[y][y] != 0]
            if ys:
                state = _col_step(state, ys[0], x)
                break
        else:
            raise RuntimeError("strongly connected block without an entry to its looped part")


def _shortest_path(g: Graph, a: int, b: int, allowed: set) -> list[int]:
    prev = {a: None}
    frontier = [a]
    while frontier:
        nxt = []
        for x in frontier:
            for y in g.successors0(x):
                if y in allowed and y not in prev:
                    prev[y] = x
                    nxt.append(y)
        frontier = nxt
    path = [b]
    while path[-1] != a:
        path.append(prev[path[-1]])
    return path[::-1]


def _positive_column(state, v: int):
    bg = state[0]
    g = bg.graph
    n = g.n
    # distances to v along positive-length paths
    dist = {}
    frontier = [y for y in range(n) if g.adj[y][v] != 0]
    for y in frontier:
        dist[y] = 1
    d = 1
    while frontier:
        d += 1
        nxt = []
        for y in frontier:
            for x in g.predecessors0(y):
                if x not in dist:
                    dist[x] = d
                    nxt.append(x)
        frontier = nxt
    kinds = bg.cp.kinds
    for u in sorted(dist, key=lambda x: (dist[x], x)):
        if u == v:
            continue
        g = state[0].graph
        ok = g.adj[u][v] is INF if g.is_singular0(u) else g.adj[u][v] != 0
        if ok:
            continue
        c = _helper(g, u, v, exclude=u)
        state = _col_step(state, c, v)
    if v in dist:
        g = state[0].graph
        blk = state[0].block_of[v]
        if g.is_singular0(v):
            need = g.adj[v][v] is not INF
        else:
            need = kinds[blk] == Kind.NONCYCLIC and g.adj[v][v] < 2
        if need:
            c = _helper(g, v, v, exclude=v)
            state = _col_step(state, c, v)
    return state


def _helper(g: Graph, u: int, v: int, exclude: int) -> int:
    for c in g.successors0(u):
        if c != exclude and c != v and g.adj[c][v] != 0:
            return c
    raise RuntimeError(f"no helper column for ({u + 1},{v + 1})")


# ---------------------------------------------------------------------------
# standard form


def _relabel_blocks(bg: BlockedGraphForm, perm: Sequence[int]):
    """Relabel so that old block perm[k] becomes block k."""
    from .moves import MoveSpec, apply_move_tracked

    order = [v for k in perm for v in bg.block_vertices(k)]
    if order == list(range(bg.graph.n)):
        return bg, None
    mv = MoveSpec("Relabel", perm=tuple(o + 1 for o in order))
    h, _ = apply_move_tracked(bg.graph, mv)
    origin = [bg.vertex_order[o] for o in order]
    return blocked(h, origin), mv


def block_isomorphisms(bg1: BlockedGraphForm, bg2: BlockedGraphForm):
    """Poset isomorphisms (as lists: block k of bg1 -> block iso[k] of bg2)
    preserving component kind and the number of singular vertices."""
    import networkx as nx
    from networkx.algorithms.isomorphism import DiGraphMatcher

    def dg(bg):
        d = nx.DiGraph()
        sing = [b - a for a, b in zip(bg.m_index, bg.n_index)]
        for i in range(bg.N):
            d.add_node(i, tag=(bg.cp.kinds[i].value, sing[i]))
        for i in range(bg.N):
            for j in range(bg.N):
                if bg.poset.lt(i, j):
                    d.add_edge(i, j)
        return d

    d1, d2 = dg(bg1), dg(bg2)
    if d1.number_of_nodes() != d2.number_of_nodes():
        return []
    gm = DiGraphMatcher(d1, d2, node_match=lambda a, b: a["tag"] == b["tag"])
    out = [[m[k] for k in range(bg1.N)] for m in gm.isomorphisms_iter()]
    return sorted(out)


class StandardPair:
    def __init__(self, F1, F2, t1, t2, w1, w2, iso):
        self.F1, self.F2 = F1, F2
        self.trace1, self.trace2 = t1, t2
        self.witness1, self.witness2 = w1, w2
        self.iso = iso


def standard_pair(g1: Graph, g2: Graph, iso: Sequence[int] | None = None) -> StandardPair:
    """Canonical forms of g1 and g2 with equal poset and multiindices.

    ``iso[k]`` names the block of g2 matched to block k of g1; by default the
    first kind-preserving poset isomorphism is used.
    """
    from .errors import PosetMismatch

    b1, _ = block_form(g1, 3)
    b2, _ = block_form(g2, 3)
    isos = block_isomorphisms(b1, b2)
    if not isos:
        raise PosetMismatch("no poset isomorphism preserving component kinds")
    if iso is None:
        iso = isos[0]
    elif list(iso) not in isos:
        raise PosetMismatch("the given map is not a kind-preserving poset isomorphism")
    # g2 relabelled so that its blocks follow g1's numbering
    h2 = _relabeled_graph(b2, iso)
    F1, t1, w1 = canonical_form(g1)
    F2, t2, w2 = canonical_form(h2)
    sizes = [max(a, b) for a, b in zip(F1.m_index, F2.m_index)]
    if list(F1.m_index) != sizes:
        F1, t1, w1 = canonical_form(g1, sizes)
    if list(F2.m_index) != sizes:
        F2, t2, w2 = canonical_form(h2, sizes)
    if F1.poset != F2.poset or F1.m_index != F2.m_index or F1.n_index != F2.n_index:
        raise PosetMismatch("canonical forms do not share a block structure")
    t2 = _prefix_trace(g2, b2, iso, t2)
    return StandardPair(F1, F2, t1, t2, w1, w2, list(iso))


def _relabeled_graph(b2: BlockedGraphForm, iso) -> Graph:
    bh, _ = _relabel_blocks(b2, iso)
    return bh.graph


def _prefix_trace(g2: Graph, b2: BlockedGraphForm, iso, t2):
    """Trace from g2 itself: its block form, the block relabelling, then t2."""
    from .moves import MoveTrace

    _, pre = block_form(g2, 3)
    _, mv = _relabel_blocks(b2, iso)
    full = MoveTrace(g2)
    full.extend(pre)
    if mv is not None:
        full.push(mv)
    full.extend(t2)
    return full
