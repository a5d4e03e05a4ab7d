"""Finite directed multigraphs with extended-natural edge counts.

Vertices are labelled 1..n in the public API.  Internally every matrix is a
tuple of row tuples indexed from 0.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import networkx as nx


class Inf:
    """The symbol for infinitely many edges.

    Absorbs addition with any integer, multiplication with positive integers,
    and is annihilated by 0.  It compares above every integer.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (Inf, ())

    def __hash__(self):
        return hash("graphmoves.INF")

    def __eq__(self, other):
        return other is self

    def __add__(self, other):
        if isinstance(other, (int, Inf)):
            return self
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, int):
            return self
        return NotImplemented

    def __mul__(self, other):
        if other is self:
            return self
        if isinstance(other, int):
            if other == 0:
                return 0
            if other > 0:
                return self
            raise ValueError("infinity times a negative number is undefined")
        return NotImplemented

    __rmul__ = __mul__

    def __lt__(self, other):
        if isinstance(other, (int, Inf)):
            return False
        return NotImplemented

    def __le__(self, other):
        if isinstance(other, (int, Inf)):
            return other is self
        return NotImplemented

    def __gt__(self, other):
        if isinstance(other, int):
            return True
        if other is self:
            return False
        return NotImplemented

    def __ge__(self, other):
        if isinstance(other, (int, Inf)):
            return True
        return NotImplemented


INF = Inf()


def is_inf(x) -> bool:
    return x is INF


class VertexClass(str, Enum):
    REGULAR = "Regular"
    SINK = "Sink"
    INFINITE_EMITTER = "InfiniteEmitter"


class GraphFormatError(ValueError):
    pass


def _check_entry(x):
    if x is INF:
        return x
    if isinstance(x, bool) or not isinstance(x, int) or x < 0:
        raise ValueError(f"edge count must be a natural number or INF, got {x!r}")
    return x


@dataclass(frozen=True)
class Graph:
    adj: tuple

    def __post_init__(self):
        rows = tuple(tuple(_check_entry(x) for x in row) for row in self.adj)
        n = len(rows)
        if n == 0:
            raise ValueError("a graph needs at least one vertex")
        if any(len(r) != n for r in rows):
            raise ValueError("adjacency matrix must be square")
        object.__setattr__(self, "adj", rows)

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable]) -> "Graph":
        return cls(tuple(tuple(r) for r in rows))

    @property
    def n(self) -> int:
        return len(self.adj)

    vertex_count = n

    def a(self, u: int, v: int):
        """Edge count u -> v, 1-based."""
        return self.adj[u - 1][v - 1]

    def row_sum(self, i: int):
        """Out-degree of the 0-based vertex i."""
        s = 0
        for x in self.adj[i]:
            s = s + x
        return s

    def successors0(self, i: int) -> list[int]:
        return [j for j, x in enumerate(self.adj[i]) if x != 0]

    def predecessors0(self, j: int) -> list[int]:
        return [i for i in range(self.n) if self.adj[i][j] != 0]

    def is_regular0(self, i: int) -> bool:
        s = self.row_sum(i)
        return s is not INF and s > 0

    def is_singular0(self, i: int) -> bool:
        return not self.is_regular0(i)

    def to_lists(self) -> list[list]:
        return [list(r) for r in self.adj]

    def digest(self) -> str:
        return hashlib.sha256(render_graph(self).encode()).hexdigest()[:16]

    def __str__(self):
        return render_graph(self)


def parse_graph(text: str) -> Graph:
    lines = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        lines.append(line)
    if not lines:
        raise GraphFormatError("empty graph file")
    try:
        n = int(lines[0])
    except ValueError:
        raise GraphFormatError(f"bad vertex count {lines[0]!r}") from None
    if n <= 0:
        raise GraphFormatError("vertex count must be positive")
    if len(lines) - 1 != n:
        raise GraphFormatError(f"expected {n} matrix rows, found {len(lines) - 1}")
    rows = []
    for line in lines[1:]:
        toks = line.split()
        if len(toks) != n:
            raise GraphFormatError(f"row {line!r} does not have {n} entries")
        row = []
        for t in toks:
            if t == "inf":
                row.append(INF)
            elif t.isdigit():
                row.append(int(t))
            else:
                raise GraphFormatError(f"malformed token {t!r}")
        rows.append(row)
    return Graph.from_rows(rows)


def render_graph(g: Graph) -> str:
    out = [str(g.n)]
    for row in g.adj:
        out.append(" ".join(str(x) for x in row))
    return "\n".join(out) + "\n"


def classify_vertices(g: Graph) -> list[VertexClass]:
    out = []
    for i in range(g.n):
        s = g.row_sum(i)
        if s is INF:
            out.append(VertexClass.INFINITE_EMITTER)
        elif s == 0:
            out.append(VertexClass.SINK)
        else:
            out.append(VertexClass.REGULAR)
    return out


def singular_vertices0(g: Graph) -> list[int]:
    return [i for i in range(g.n) if g.is_singular0(i)]


def regular_vertices0(g: Graph) -> list[int]:
    return [i for i in range(g.n) if g.is_regular0(i)]


def b_matrix(g: Graph) -> list[list]:
    """A - I with entries in Z union {INF}."""
    B = [list(r) for r in g.adj]
    for i in range(g.n):
        B[i][i] = B[i][i] - 1
    return B


def b_matrices(g: Graph):
    """Return (B, B_bullet, singular_rows) with 1-based singular row labels."""
    B = b_matrix(g)
    sing = singular_vertices0(g)
    sset = set(sing)
    bullet = [list(B[i]) for i in range(g.n) if i not in sset]
    for row in bullet:
        if any(x is INF for x in row):
            raise AssertionError("regular row carries an infinite entry")
    return B, bullet, [i + 1 for i in sing]


def b_bullet(g: Graph) -> list[list[int]]:
    return b_matrices(g)[1]


def support_digraph(g: Graph) -> nx.DiGraph:
    d = nx.DiGraph()
    d.add_nodes_from(range(g.n))
    for i in range(g.n):
        for j in g.successors0(i):
            d.add_edge(i, j)
    return d


def reachability0(g: Graph) -> list[list[bool]]:
    """R[u][v] is True iff a path of length >= 0 runs from u to v (0-based)."""
    d = support_digraph(g)
    R = [[False] * g.n for _ in range(g.n)]
    for u in range(g.n):
        R[u][u] = True
        for v in nx.descendants(d, u):
            R[u][v] = True
    return R


def reachability(g: Graph) -> list[list[bool]]:
    """Boolean matrix of the preorder u >= v, rows and columns in vertex order."""
    return reachability0(g)


def positive_reach0(g: Graph) -> list[list[bool]]:
    """P[u][v] is True iff a path of length >= 1 runs from u to v."""
    R = reachability0(g)
    P = [[False] * g.n for _ in range(g.n)]
    for u in range(g.n):
        for w in g.successors0(u):
            for v in range(g.n):
                if R[w][v]:
                    P[u][v] = True
    return P


def permute_graph(g: Graph, order: Sequence[int]) -> Graph:
    """New graph whose vertex k is the old 0-based vertex order[k]."""
    if sorted(order) != list(range(g.n)):
        raise ValueError("order must be a permutation of the vertices")
    return Graph.from_rows([[g.adj[i][j] for j in order] for i in order])


def ext_to_json(x):
    return "inf" if x is INF else x


def ext_from_json(x):
    if x == "inf":
        return INF
    return int(x)
