"""Component poset, transition states, hereditary/saturated closure, and the
eligibility checkers for the Cuntz splice and the eclosing move."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import networkx as nx

from .graph_core import INF, Graph, positive_reach0, reachability0, support_digraph


class Kind(str, Enum):
    CYCLIC = "Cyclic"
    NONCYCLIC = "NoncyclicSCC"
    SINGULAR = "SingularSingleton"


@dataclass(frozen=True)
class ComponentPoset:
    """Components in poset order.  Vertex labels stored here are 0-based.

    Component i precedes component j (i <= j in the poset) iff component i
    reaches component j; the numbering satisfies i <= j whenever i precedes j.
    """

    comps: tuple[tuple[int, ...], ...]
    kinds: tuple[Kind, ...]
    transition0: tuple[int, ...]
    leq: tuple[tuple[bool, ...], ...]
    index: tuple[int | None, ...] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.comps)

    @property
    def components(self) -> list[set[int]]:
        return [{v + 1 for v in c} for c in self.comps]

    @property
    def transition_states(self) -> set[int]:
        return {v + 1 for v in self.transition0}

    def precedes(self, i: int, j: int) -> bool:
        """i reaches j (0-based component indices, reflexive)."""
        return self.leq[i][j]

    def strictly(self, i: int, j: int) -> bool:
        return i != j and self.leq[i][j]

    def component_of(self, v: int) -> int | None:
        """Component index of 1-based vertex v, or None for a transition state."""
        return self.index[v - 1]

    def immediate_successors(self, i: int) -> list[int]:
        out = []
        for j in range(self.size):
            if self.strictly(i, j) and not any(
                self.strictly(i, k) and self.strictly(k, j) for k in range(self.size)
            ):
                out.append(j)
        return out

    def immediate_predecessors(self, i: int) -> list[int]:
        return [j for j in range(self.size) if i in self.immediate_successors(j)]

    def to_json(self) -> dict:
        return {
            "components": [sorted(c) for c in self.components],
            "kinds": [k.value for k in self.kinds],
            "transition_states": sorted(self.transition_states),
            "order": [[j + 1 for j in range(self.size) if self.strictly(i, j)]
                      for i in range(self.size)],
        }


def _is_cyclic_scc(g: Graph, comp: Iterable[int]) -> bool:
    cs = set(comp)
    for v in cs:
        inside = [(w, g.adj[v][w]) for w in cs if g.adj[v][w] != 0]
        if len(inside) != 1 or inside[0][1] != 1:
            return False
    return True


def _scc_has_cycle(g: Graph, comp: tuple[int, ...]) -> bool:
    return len(comp) > 1 or g.adj[comp[0]][comp[0]] != 0


def components(g: Graph) -> ComponentPoset:
    d = support_digraph(g)
    raw = []
    for scc in nx.strongly_connected_components(d):
        c = tuple(sorted(scc))
        if _scc_has_cycle(g, c):
            kind = Kind.CYCLIC if _is_cyclic_scc(g, c) else Kind.NONCYCLIC
            raw.append((c, kind))
        elif g.is_singular0(c[0]):
            raw.append((c, Kind.SINGULAR))
    placed = {v for c, _ in raw for v in c}
    transition = tuple(v for v in range(g.n) if v not in placed)
    R = reachability0(g)
    k = len(raw)
    reach = [[R[raw[a][0][0]][raw[b][0][0]] for b in range(k)] for a in range(k)]
    # Kahn order with smallest-vertex tie-break
    order = []
    remaining = set(range(k))
    while remaining:
        ready = [a for a in remaining
                 if not any(b != a and b in remaining and reach[b][a] for b in remaining)]
        a = min(ready, key=lambda x: raw[x][0][0])
        order.append(a)
        remaining.remove(a)
    comps = tuple(raw[a][0] for a in order)
    kinds = tuple(raw[a][1] for a in order)
    leq = tuple(tuple(reach[a][b] for b in order) for a in order)
    index: list[int | None] = [None] * g.n
    for i, c in enumerate(comps):
        for v in c:
            index[v] = i
    return ComponentPoset(comps, kinds, transition, leq, tuple(index))


def return_path_counts0(g: Graph) -> list[int]:
    """0, 1 or 2 (meaning two or more) return paths at each vertex."""
    cp = components(g)
    out = [0] * g.n
    for c, kind in zip(cp.comps, cp.kinds):
        if kind == Kind.SINGULAR:
            continue
        val = 1 if kind == Kind.CYCLIC else 2
        for v in c:
            out[v] = val
    return out


def condition_k(g: Graph) -> bool:
    return all(k != Kind.CYCLIC for k in components(g).kinds)


def saturated_hereditary_closure(g: Graph, S: Iterable[int]) -> set[int]:
    """Smallest hereditary saturated set containing the 1-based set S."""
    R = reachability0(g)
    cur = set()
    for s in S:
        cur |= {v for v in range(g.n) if R[s - 1][v]}
    changed = True
    while changed:
        changed = False
        for v in range(g.n):
            if v in cur or not g.is_regular0(v):
                continue
            if all(w in cur for w in g.successors0(v)):
                cur.add(v)
                changed = True
    return {v + 1 for v in cur}


@dataclass(frozen=True)
class Clause:
    name: str
    passed: bool
    witnesses: tuple = ()


@dataclass(frozen=True)
class EligibilityReport:
    clauses: tuple[Clause, ...]
    targets: tuple[int, ...] = ()

    @property
    def eligible(self) -> bool:
        return all(c.passed for c in self.clauses)

    def __bool__(self):
        return self.eligible

    def failed(self) -> list[Clause]:
        return [c for c in self.clauses if not c.passed]

    def to_json(self) -> dict:
        return {
            "eligible": self.eligible,
            "targets": list(self.targets),
            "clauses": [{"name": c.name, "passed": c.passed, "witnesses": list(c.witnesses)}
                        for c in self.clauses],
        }


def supports_two_return_paths(g: Graph, v: int) -> bool:
    """1-based v lies on at least two distinct return paths."""
    return return_path_counts0(g)[v - 1] >= 2


def moveP_eligible(g: Graph, u: int) -> EligibilityReport:
    i = u - 1
    counts = return_path_counts0(g)
    targets = tuple(w + 1 for w in g.successors0(i) if w != i)
    clauses = [
        Clause("u is regular", g.is_regular0(i), (u,)),
        Clause("u supports a loop", g.adj[i][i] != 0, (u,)),
        Clause("the loop is the only return path at u", counts[i] == 1 and g.adj[i][i] == 1, (u,)),
        Clause("the loop has an exit", bool(targets), targets),
    ]
    bad_reg = tuple(w for w in targets if not g.is_regular0(w - 1))
    clauses.append(Clause("every other target is regular", not bad_reg, bad_reg))
    bad_ret = tuple(w for w in targets if counts[w - 1] < 2)
    clauses.append(Clause("every other target supports two return paths", not bad_ret, bad_ret))
    return EligibilityReport(tuple(clauses), targets)


def form_level(g: Graph) -> int:
    """Largest k in {1,2,3} with the graph in the k-circle block form, or 0.

    Level 1: infinite emitters emit infinitely to every target they hit and
    transition states emit exactly one edge.  Level 2 also forbids transition
    states.  Level 3 also makes cyclic components singletons.
    """
    for i in range(g.n):
        if g.row_sum(i) is INF and any(x not in (0, INF) for x in g.adj[i]):
            return 0
    cp = components(g)
    for t in cp.transition0:
        if g.row_sum(t) != 1:
            return 0
    if cp.transition0:
        return 1
    if any(k == Kind.CYCLIC and len(c) > 1 for c, k in zip(cp.comps, cp.kinds)):
        return 2
    return 3


def assumption_hash_check(g: Graph, u0: int) -> EligibilityReport:
    i0 = u0 - 1
    cp = components(g)
    c0 = cp.index[i0]
    targets0 = [w for w in g.successors0(i0) if w != i0]
    imm = cp.immediate_successors(c0) if c0 is not None else []
    clauses = [Clause("graph is in double-circle form", form_level(g) >= 2)]
    clauses.append(Clause("{u0} is a cyclic component",
                          c0 is not None and cp.kinds[c0] == Kind.CYCLIC and len(cp.comps[c0]) == 1,
                          (u0,)))
    s = g.row_sum(i0)
    clauses.append(Clause("u0 emits at least two edges", s is INF or s >= 2, (u0,)))
    bad = tuple(w + 1 for w in targets0
                if cp.index[w] is None or cp.kinds[cp.index[w]] != Kind.NONCYCLIC)
    clauses.append(Clause("u0 only emits to noncyclic components", not bad, bad))
    bad = tuple(w + 1 for w in targets0 if cp.index[w] not in imm)
    clauses.append(Clause("u0 only emits to immediate successors", not bad, bad))
    bad = []
    for j in imm:
        cnt = sum(g.adj[i0][w] for w in cp.comps[j])
        if cnt != 1:
            bad.append(j + 1)
    clauses.append(Clause("exactly one edge to each immediate successor", not bad, tuple(bad)))
    bad = []
    for w in targets0:
        comp = set(cp.comps[cp.index[w]]) if cp.index[w] is not None else set()
        others = [(y, g.adj[w][y]) for y in g.successors0(w) if y != w]
        ok = (g.adj[w][w] == 1 and len(others) == 1 and others[0][1] == 1
              and others[0][0] in comp)
        if not ok:
            bad.append(w + 1)
    clauses.append(Clause("targets have one loop and one other edge inside their component",
                          not bad, tuple(bad)))
    bad = []
    for w in targets0:
        comp = set(cp.comps[cp.index[w]]) if cp.index[w] is not None else set()
        for x in g.predecessors0(w):
            if x != i0 and x not in comp:
                bad.append(w + 1)
                break
            if x == i0 and g.adj[x][w] != 1:
                bad.append(w + 1)
                break
    clauses.append(Clause("targets only receive edges from their component and u0",
                          not bad, tuple(bad)))
    return EligibilityReport(tuple(clauses), tuple(w + 1 for w in targets0))


def positive_reach(g: Graph) -> list[list[bool]]:
    return positive_reach0(g)
