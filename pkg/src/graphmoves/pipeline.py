"""Stable and unital comparison drivers with certificates, unit-class
adjustment, and the lens-space bound phi(r)."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import intmat as im
from .blocks import (BlockedGraphForm, BlockMatrix, EquivWitness, Verdict as EquivKind,
                     block_form, block_isomorphisms, blocked, pad_index, standard_pair)
from .errors import GraphMovesError, HypothesisViolated, PosetMismatch
from .graph_core import Graph, ext_to_json
from .kweb import lift_iso_bounded, records_match, reduced_invariant
from .moves import MoveTrace, apply_move_tracked

DEFAULT_BUDGET = 3
DEFAULT_SECONDS = 60.0


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class Verdict:
    name = "Verdict"
    exit_code = 3

    def to_json(self) -> dict:
        return {"verdict": self.name}


@dataclass
class EquivalentStable(Verdict):
    certificate: dict
    name = "EquivalentStable"
    exit_code = 0

    def to_json(self) -> dict:
        return {"verdict": self.name, "certificate": self.certificate}


@dataclass
class EquivalentUnital(Verdict):
    certificate: dict
    name = "EquivalentUnital"
    exit_code = 0

    def to_json(self) -> dict:
        return {"verdict": self.name, "certificate": self.certificate}


@dataclass
class NotEquivalent(Verdict):
    reason: str
    name = "NotEquivalent"
    exit_code = 1

    def to_json(self) -> dict:
        return {"verdict": self.name, "reason": self.reason}


@dataclass
class Unknown(Verdict):
    reason: str
    notes: list = field(default_factory=list)
    name = "Unknown"
    exit_code = 2

    def to_json(self) -> dict:
        return {"verdict": self.name, "reason": self.reason, "notes": self.notes}


# ---------------------------------------------------------------------------
# certificates


def graph_json(g: Graph) -> list:
    return [[ext_to_json(x) for x in r] for r in g.adj]


def equivalence_cert(w: EquivWitness, require: str = "GLP", pin_v=(), det_u=None, det_v=None,
                     source_graph: Graph | None = None, target_graph: Graph | None = None,
                     pad=None) -> dict:
    """A witness (U, V) with U source V = target plus the checks it must pass."""
    d = {"type": "equivalence", "require": require, "witness": w.to_json(),
         "pin_v": [i + 1 for i in pin_v]}
    if det_u is not None:
        d["det_U"] = list(det_u)
    if det_v is not None:
        d["det_V"] = list(det_v)
    if source_graph is not None:
        d["source_graph"] = graph_json(source_graph)
        d["pad"] = list(pad) if pad is not None else [0] * w.source.N
    if target_graph is not None:
        d["target_graph"] = graph_json(target_graph)
    return d


def _anchor(trace: MoveTrace, source: BlockMatrix) -> tuple[int, list[int]]:
    """First trace position whose graph, padded, gives the witness source."""
    g = trace.start
    graphs = [g]
    for st in trace.steps:
        g = apply_move_tracked(g, st.move)[0]
        graphs.append(g)
    for k, h in enumerate(graphs):
        try:
            bh = blocked(h)
        except ValueError:
            continue
        B = bh.bullet()
        if B.poset != source.poset or len(B.n) != len(source.n):
            continue
        r = [a - b for a, b in zip(source.n, B.n)]
        if any(x < 0 for x in r) or [a - b for a, b in zip(source.m, B.m)] != r:
            continue
        rows, cols = pad_index(B.m, r), pad_index(B.n, r)
        if im.equal(source.M[np.ix_(rows, cols)], B.M):
            return k, r
    raise ValueError("no trace position matches the witness source")


def canonical_cert(g: Graph, F: BlockedGraphForm, trace: MoveTrace, wit: EquivWitness) -> dict:
    k, r = _anchor(trace, wit.source)
    return {"type": "canonical", "graph": graph_json(g), "canonical": graph_json(F.graph),
            "trace": trace.to_json(), "anchor": k, "pad": r, "witness": wit.to_json()}


# ---------------------------------------------------------------------------
# unit class transport


def _vertex_map(g: Graph, move, x: list[int]) -> list[int]:
    h, mapping = apply_move_tracked(g, move)
    k = move.kind
    out = [0] * h.n
    if k == "Relabel" or k in ("RowAdd", "RowSub", "ColAdd", "ColSub"):
        for old, new in enumerate(mapping):
            out[new] += x[old]
        return out
    w = move.u - 1
    for old, new in enumerate(mapping):
        if new is not None:
            out[new] += x[old]
    if k in ("S", "Col"):
        for y in range(g.n):
            if y != w and g.adj[w][y] != 0:
                out[mapping[y]] += x[w] * g.adj[w][y]
    elif k == "R":
        y = g.successors0(w)[0]
        out[mapping[y]] += x[w]
    elif k == "O":
        copies = [t for t in range(h.n) if t not in set(mapping) or t == mapping[w]]
        for t in copies:
            if t != mapping[w]:
                out[t] += x[w]
    elif k not in ("I", "C", "EdgeExpand"):
        raise ValueError(f"no vertex-class rule for move {k}")
    return out


def transport_unit(trace: MoveTrace, x=None) -> list[int]:
    """Image of a vertex-class vector (default: the unit) along a trace.

    Steps carrying a witness (U, V) send x to V^T x, padding x with zeros;
    the others use the vertex-projection identities of each move."""
    g = trace.start
    x = [1] * g.n if x is None else list(x)
    for st in trace.steps:
        w = st.witness
        if w is not None:
            sizes = blocked(g).n_index
            r = [a - b for a, b in zip(w.source.n, sizes)]
            full = [0] * w.source.M.shape[1]
            for k, j in enumerate(pad_index(sizes, r)):
                full[j] = x[k]
            x = [int(v) for v in im.mul(w.V.T, im.mat([[v] for v in full], (len(full), 1))).flat]
            g = apply_move_tracked(g, st.move)[0]
        else:
            x = _vertex_map(g, st.move, x)
            g = apply_move_tracked(g, st.move)[0]
    return x


def unit_condition(V: np.ndarray, B2: BlockMatrix, x1, x2) -> list[int] | None:
    """y with B2^T y = V^T x1 - x2, or None."""
    lhs = im.mul(V.T, im.mat([[v] for v in x1], (len(x1), 1)))
    rhs = [int(a) - int(b) for a, b in zip(lhs.flat, x2)]
    return im.solve_integer(B2.M.T.copy(), rhs)


def unit_adjust(V: np.ndarray, B_F: BlockMatrix, source_unit=None, target_unit=None) -> np.ndarray:
    """V' with B_F V' = B_F and (V V')^T x1 = x2 (both default to all-ones).

    Rows of the correction sit at vertices of predecessor-free blocks whose
    columns of B_F are zero; each other vertex v takes its correction from
    the first such vertex above it."""
    n = B_F.M.shape[1]
    x1 = [1] * V.shape[0] if source_unit is None else list(source_unit)
    x2 = [1] * n if target_unit is None else list(target_unit)
    w = [int(a) for a in im.mul(V.T, im.mat([[v] for v in x1], (len(x1), 1))).flat]
    blk = [i for i in range(B_F.N) for _ in range(B_F.n[i])]
    tops = [v for v in range(n)
            if not any(B_F.poset.lt(j, blk[v]) for j in range(B_F.N))
            and B_F.n[blk[v]] == 1 and not any(int(a) for a in B_F.M[:, v])]
    for v in tops:
        if w[v] != x2[v]:
            raise HypothesisViolated(f"coordinate {v + 1} of the unit class is not already matched")
    Vp = im.identity(n)
    for v in range(n):
        if v in tops or w[v] == x2[v]:
            continue
        above = [t for t in tops if B_F.poset.le(blk[t], blk[v])]
        if not above:
            raise HypothesisViolated(f"vertex {v + 1} is not below a predecessor-free vertex")
        Vp[above[0], v] = x2[v] - w[v]
    if not im.equal(im.mul(B_F.M, Vp), B_F.M):
        raise HypothesisViolated("correction does not fix B_F")
    return Vp


# ---------------------------------------------------------------------------
# deciders


def _prefilter(g1: Graph, g2: Graph):
    """Matching block isomorphisms, or a NotEquivalent reason."""
    b1, _ = block_form(g1, 3)
    b2, _ = block_form(g2, 3)
    isos = block_isomorphisms(b1, b2)
    if not isos:
        return None, "no kind-preserving isomorphism of the component posets"
    ri1, ri2 = reduced_invariant(b1), reduced_invariant(b2)
    good, reasons = [], []
    for iso in isos:
        why = records_match(ri1, ri2, iso)
        if why is None:
            good.append(iso)
        else:
            reasons.append(why)
    if not good:
        return None, f"reduced invariants differ ({reasons[0]})"
    return good, ""


def _pin(B: BlockMatrix) -> list[int]:
    return [i for i in range(B.N) if B.n[i] == 1]


def _search(g1: Graph, g2: Graph, budget: int, seconds: float, accept_factory=None):
    isos, reason = _prefilter(g1, g2)
    if isos is None:
        return None, NotEquivalent(reason)
    t0 = time.monotonic()
    notes = []
    for iso in isos:
        if time.monotonic() - t0 > seconds:
            notes.append("time limit reached")
            break
        try:
            sp = standard_pair(g1, g2, iso)
        except (PosetMismatch, GraphMovesError, RuntimeError) as e:
            notes.append(f"iso {iso}: {e}")
            continue
        B1, B2 = sp.F1.bullet(), sp.F2.bullet()
        accept = accept_factory(sp) if accept_factory else None
        if sp.F1.graph.digest() == sp.F2.graph.digest():
            w = EquivWitness.identity(B1)
            if accept is None or accept(w):
                return (sp, w), None
        res = lift_iso_bounded(B1, B2, bound=budget, pin_v=_pin(B1), accept=accept)
        if res.found:
            return (sp, res.witness), None
        notes.append(f"iso {iso}: {res.reason} after {res.tried} candidates")
    return None, Unknown("no witness within budget", notes)


def _compare_cert(g1, g2, sp, w) -> dict:
    return {"type": "compare", "g1": graph_json(g1), "g2": graph_json(g2),
            "iso": [i + 1 for i in sp.iso],
            "canonical1": canonical_cert(g1, sp.F1, sp.trace1, sp.witness1),
            "canonical2": canonical_cert(g2, sp.F2, sp.trace2, sp.witness2),
            "lift": equivalence_cert(w, "GLP", _pin(w.source)),
            "lift_kind": w.check().verdict.value}


def _attach_moves(cert: dict, sp, w):
    from .factorize import gl_to_sl, slp_to_moves

    try:
        rep = gl_to_sl(sp.F1, sp.F2, w)
        trace, _ = slp_to_moves(rep.F1, rep.F2, rep.witness)
    except (HypothesisViolated, RuntimeError) as e:
        cert["moves_note"] = f"no move trace: {e}"
        return
    cert["moves"] = {"repair1": rep.trace1.to_json(), "repair2": rep.trace2.to_json(),
                     "witness": equivalence_cert(rep.witness, "SLP"),
                     "trace": trace.to_json(), "notes": rep.notes}


def decide_stable(g1: Graph, g2: Graph, budget: int = DEFAULT_BUDGET,
                  seconds: float = DEFAULT_SECONDS, moves: bool = False) -> Verdict:
    """Semi-decision of stable isomorphism of the graph algebras.

    NotEquivalent comes only from invariant mismatches; an exhausted search
    gives Unknown."""
    found, verdict = _search(g1, g2, budget, seconds)
    if found is None:
        return verdict
    sp, w = found
    cert = _compare_cert(g1, g2, sp, w)
    if moves:
        _attach_moves(cert, sp, w)
    return EquivalentStable(cert)


def _units(sp):
    return transport_unit(sp.trace1), transport_unit(sp.trace2)


def decide_unital(g1: Graph, g2: Graph, budget: int = DEFAULT_BUDGET,
                  seconds: float = DEFAULT_SECONDS) -> Verdict:
    """As decide_stable, plus the unit class must be carried to the unit
    class; first by adjusting V, then by searching again."""
    found, verdict = _search(g1, g2, budget, seconds)
    if found is None:
        return verdict
    sp, w = found
    x1, x2 = _units(sp)
    B2 = sp.F2.bullet()
    V = w.V
    notes = []
    if unit_condition(V, B2, x1, x2) is None:
        try:
            V = im.mul(V, unit_adjust(V, B2, x1, x2))
            w = EquivWitness(w.U, V, w.source, w.target)
            notes.append("unit class matched by adjusting V")
        except HypothesisViolated as e:
            notes.append(f"unit adjustment not applicable: {e}")

            def accept_factory(sp2):
                u1, u2 = _units(sp2)
                tgt = sp2.F2.bullet()
                return lambda cand: unit_condition(cand.V, tgt, u1, u2) is not None

            found, verdict = _search(g1, g2, budget, seconds, accept_factory)
            if found is None:
                if isinstance(verdict, Unknown):
                    verdict.notes = notes + verdict.notes
                return verdict
            sp, w = found
            x1, x2 = _units(sp)
            B2 = sp.F2.bullet()
    y = unit_condition(w.V, B2, x1, x2)
    if y is None or w.check().verdict == EquivKind.NEITHER:
        return Unknown("unit condition not met", notes)
    cert = _compare_cert(g1, g2, sp, w)
    cert["unit"] = {"x1": x1, "x2": x2, "y": y}
    cert["notes"] = notes
    return EquivalentUnital(cert)


# ---------------------------------------------------------------------------
# lens spaces


def phi_lens(r: int) -> int:
    """Smallest even number above the smallest divisor of r exceeding 2."""
    if isinstance(r, bool) or not isinstance(r, int) or r <= 2:
        raise ValueError("r must be an integer greater than 2")
    a = next(d for d in range(3, r + 1) if r % d == 0)
    return a + 1 if a % 2 else a + 2
