"""The reduced K-web of a block matrix, the reduced filtered K-theory of a
graph in block form, induced isomorphisms, and a bounded search lifting an
invariant isomorphism to a block equivalence."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from math import gcd
from typing import Sequence

import numpy as np

from . import intmat as im
from .blocks import BlockedGraphForm, BlockMatrix, EquivWitness, Poset, offsets, verify_equiv
from .structure import Kind


class OrderTag(str, Enum):
    PURELY_INFINITE = "PurelyInfinite"
    CYCLIC_Z = "CyclicZ"
    SINGULAR_Z = "SingularZ"


_TAGS = {Kind.NONCYCLIC: OrderTag.PURELY_INFINITE, Kind.CYCLIC: OrderTag.CYCLIC_Z,
         Kind.SINGULAR: OrderTag.SINGULAR_Z}


class ExactnessError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# convex sets


@dataclass(frozen=True)
class ConvexSets:
    poset: Poset
    r: tuple[frozenset, ...]
    s: tuple[frozenset, ...]
    imm: tuple[tuple[int, ...], ...]

    @property
    def I0(self) -> list[frozenset]:
        out = []
        for i in range(self.poset.size):
            for c in (self.r[i], self.s[i], frozenset([i])):
                if c and c not in out:
                    out.append(c)
        return out

    @property
    def I1(self) -> list[int]:
        return [i for i in range(self.poset.size) if self.r[i]]

    def hom_pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.poset.size) for j in self.imm[i]
                if len(self.imm[i]) > 1]


def convex_sets(P: Poset) -> ConvexSets:
    N = P.size
    r = tuple(frozenset(j for j in range(N) if P.lt(j, i)) for i in range(N))
    s = tuple(frozenset(j for j in range(N) if P.le(j, i)) for i in range(N))
    imm = tuple(tuple(P.immediate_down(i)) for i in range(N))
    return ConvexSets(P, r, s, imm)


def is_convex(P: Poset, c) -> bool:
    c = set(c)
    if not c:
        return False
    return all(k in c for i in c for j in c for k in range(P.size) if P.le(i, k) and P.le(k, j))


# ---------------------------------------------------------------------------
# submatrices


def _rows(B: BlockMatrix, c) -> list[int]:
    return [x for i in sorted(c) for x in B.rows_of(i)]


def _cols(B: BlockMatrix, c) -> list[int]:
    return [x for i in sorted(c) for x in B.cols_of(i)]


def sub(B: BlockMatrix, rows_c, cols_c=None) -> np.ndarray:
    cols_c = rows_c if cols_c is None else cols_c
    r, c = _rows(B, rows_c), _cols(B, cols_c)
    out = im.zeros(len(r), len(c))
    if r and c:
        out[:, :] = B.M[np.ix_(r, c)]
    return out


def _square_sub(M: np.ndarray, idx: list[int]) -> np.ndarray:
    out = im.zeros(len(idx), len(idx))
    if idx:
        out[:, :] = M[np.ix_(idx, idx)]
    return out


def _embedding(B: BlockMatrix, small, big, rows: bool = True) -> np.ndarray:
    """0/1 matrix embedding coordinates of the set small into those of big."""
    f = _rows if rows else _cols
    a, b = f(B, small), f(B, big)
    T = im.zeros(len(b), len(a))
    pos = {x: k for k, x in enumerate(b)}
    for k, x in enumerate(a):
        T[pos[x], k] = 1
    return T


def _col(v) -> np.ndarray:
    return im.mat([[int(x)] for x in v], (len(v), 1))


# ---------------------------------------------------------------------------
# the K-web


@dataclass(frozen=True)
class KWebMap:
    """A homomorphism between groups of the web.

    ``T`` acts on ambient coordinates (for a kernel source, on kernel-basis
    coordinates); ``matrix`` is the same map in normal-form coordinates.
    """

    kind: str
    source: object
    target: object
    T: np.ndarray
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class KWeb:
    B: BlockMatrix
    sets: ConvexSets
    cok: dict
    ker: dict
    maps: tuple[KWebMap, ...]

    def cok_of(self, c) -> im.FGAbPresentation:
        return self.cok[frozenset(c)]

    def signature(self) -> dict:
        return {"cok": {tuple(sorted(c)): g.signature() for c, g in self.cok.items()},
                "ker": {i: b.rank for i, b in self.ker.items()}}

    def to_json(self) -> dict:
        return {
            "cok": [{"set": sorted(i + 1 for i in c), "factors": list(g.factors),
                     "free_rank": g.free_rank, "text": str(g)} for c, g in self.cok.items()],
            "ker": [{"block": i + 1, "rank": b.rank} for i, b in self.ker.items()],
            "maps": [{"kind": m.kind, "source": _label(m.source), "target": _label(m.target),
                      "matrix": im.to_lists(m.matrix),
                      "shape": list(m.matrix.shape)} for m in self.maps],
        }


def _label(x):
    if isinstance(x, frozenset):
        return {"cok": sorted(i + 1 for i in x)}
    return {"ker": x + 1}


def _kernel_coords(K: np.ndarray, x) -> list[int]:
    y = im.solve_integer(K, [int(v) for v in x])
    if y is None:
        raise ExactnessError("vector is not in the kernel lattice")
    return y


def _cok_matrix(pres: im.FGAbPresentation, T: np.ndarray) -> np.ndarray:
    out = im.zeros(len(pres.kept), T.shape[1])
    for j in range(T.shape[1]):
        for r, v in enumerate(pres.coords([int(x) for x in T[:, j]])):
            out[r, j] = v
    return out


def kweb(B: BlockMatrix, check: bool = True) -> KWeb:
    sets = convex_sets(B.poset)
    cok = {c: im.cokernel(sub(B, c)) for c in sets.I0}
    ker = {}
    for i in range(B.N):
        ker[i] = im.kernel(B.block(i, i))
    ker = {i: ker[i] for i in sets.I1}
    maps = []
    for i in sets.I1:
        r, s, one = sets.r[i], sets.s[i], frozenset([i])
        K = ker[i].as_matrix()
        bd = im.mul(sub(B, r, one), K)
        maps.append(KWebMap("boundary", i, r, bd, _cok_matrix(cok[r], bd)))
        inc = _embedding(B, r, s)
        maps.append(KWebMap("inclusion", r, s, inc, im.induced_hom(sub(B, r), sub(B, s), inc)))
        proj = _embedding(B, one, s).T.copy()
        maps.append(KWebMap("projection", s, one, proj,
                            im.induced_hom(sub(B, s), sub(B, one), proj)))
    for i, j in sets.hom_pairs():
        T = _embedding(B, sets.s[j], sets.r[i])
        maps.append(KWebMap("hom", sets.s[j], sets.r[i], T,
                            im.induced_hom(sub(B, sets.s[j]), sub(B, sets.r[i]), T)))
    web = KWeb(B, sets, cok, ker, tuple(maps))
    if check:
        check_exactness(web)
    return web


def _preimage_basis(T: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Basis (columns) of {x : T x in im M}."""
    b = T.shape[1]
    stacked = im.zeros(T.shape[0], b + M.shape[1])
    stacked[:, :b] = T
    if M.shape[1]:
        stacked[:, b:] = -M
    L = im.kernel(stacked).as_matrix()
    return L[:b, :]


def _in_lattice(gens: np.ndarray, x) -> bool:
    if gens.shape[1] == 0:
        return all(int(v) == 0 for v in x)
    return im.in_image(gens, [int(v) for v in x])


def _exact_at(Tf: np.ndarray, Mmid: np.ndarray, Tg: np.ndarray, Mtgt: np.ndarray) -> bool:
    """im f == ker g inside cok Mmid, maps given on ambient coordinates."""
    gens = im.zeros(Mmid.shape[0], Tf.shape[1] + Mmid.shape[1])
    gens[:, :Tf.shape[1]] = Tf
    gens[:, Tf.shape[1]:] = Mmid
    for j in range(Tf.shape[1]):
        if not _in_lattice(Mtgt, im.mul(Tg, Tf[:, [j]])[:, 0]):
            return False
    pre = _preimage_basis(Tg, Mtgt)
    return all(_in_lattice(gens, pre[:, j]) for j in range(pre.shape[1]))


def check_exactness(web: KWeb):
    B = web.B
    for i in web.sets.I1:
        r, s, one = web.sets.r[i], web.sets.s[i], frozenset([i])
        bd = next(m for m in web.maps if m.kind == "boundary" and m.source == i)
        inc = next(m for m in web.maps
                   if m.kind == "inclusion" and m.source == r and m.target == s)
        proj = next(m for m in web.maps if m.kind == "projection" and m.source == s)
        if not _exact_at(bd.T, sub(B, r), inc.T, sub(B, s)):
            raise ExactnessError(f"sequence of block {i + 1} not exact at cok r")
        if not _exact_at(inc.T, sub(B, s), proj.T, sub(B, one)):
            raise ExactnessError(f"sequence of block {i + 1} not exact at cok s")


# ---------------------------------------------------------------------------
# induced isomorphisms


class LadderError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class KWebIso:
    source: KWeb
    target: KWeb
    cok_maps: dict
    ker_maps: dict

    def to_json(self) -> dict:
        return {"cok": [{"set": sorted(i + 1 for i in c), "matrix": im.to_lists(m),
                         "shape": list(m.shape)} for c, m in self.cok_maps.items()],
                "ker": [{"block": i + 1, "matrix": im.to_lists(m), "shape": list(m.shape)}
                        for i, m in self.ker_maps.items()]}


def induced_iso(U: np.ndarray, V: np.ndarray, B: BlockMatrix, B2: BlockMatrix) -> KWebIso:
    rep = verify_equiv(U, B, V, B2)
    if rep.verdict.value == "neither":
        raise ValueError(f"not an equivalence: {rep.reason}")
    w1, w2 = kweb(B), kweb(B2)
    W = im.inverse_unimodular(V) if V.shape[0] else V
    Ub = BlockMatrix(B.poset, B.m, B.m, U)
    Wb = BlockMatrix(B.poset, B.n, B.n, W)
    cok_maps = {c: im.induced_hom(sub(B, c), sub(B2, c), sub(Ub, c)) for c in w1.cok}
    ker_maps = {}
    for i in w1.ker:
        K1, K2 = w1.ker[i].as_matrix(), w2.ker[i].as_matrix()
        img = im.mul(Wb.block(i, i), K1)
        M = im.zeros(K2.shape[1], K1.shape[1])
        for j in range(K1.shape[1]):
            for r, v in enumerate(_kernel_coords(K2, img[:, j])):
                M[r, j] = v
        ker_maps[i] = M
    _check_ladder(B, B2, Ub, Wb, w1, w2)
    return KWebIso(w1, w2, cok_maps, ker_maps)


def _check_ladder(B, B2, Ub, Wb, w1: KWeb, w2: KWeb):
    for m1 in w1.maps:
        if m1.kind == "boundary":
            i = m1.source
            r = m1.target
            K1 = w1.ker[i].as_matrix()
            lhs = im.mul(sub(Ub, r), sub(B, r, [i]), K1)
            rhs = im.mul(sub(B2, r, [i]), Wb.block(i, i), K1)
            M = sub(B2, r)
        else:
            a, b = m1.source, m1.target
            lhs = im.mul(sub(Ub, b), m1.T)
            rhs = im.mul(m1.T, sub(Ub, a))
            M = sub(B2, b)
        diff = lhs - rhs
        for j in range(diff.shape[1]):
            if not _in_lattice(M, diff[:, j]):
                raise LadderError(f"{m1.kind} square does not commute")


# ---------------------------------------------------------------------------
# reduced filtered K-theory


def c_matrix(B: BlockMatrix) -> BlockMatrix:
    """J B^T J over the opposite poset; block i of B becomes block N-1-i."""
    N = B.N
    leq = [[B.poset.le(N - 1 - b, N - 1 - a) for b in range(N)] for a in range(N)]
    Mt = B.M.T[::-1, ::-1].copy() if B.M.size else im.zeros(sum(B.n), sum(B.m))
    return BlockMatrix(Poset(leq), tuple(B.n[::-1]), tuple(B.m[::-1]), Mt)


@dataclass(frozen=True, eq=False)
class ReducedInvariant:
    bg: BlockedGraphForm
    C: BlockMatrix
    web: KWeb
    kernels: dict
    tags: tuple[OrderTag, ...]
    unit: tuple[int, ...]

    def block_of_c(self, k: int) -> int:
        """Graph block matching block k of the C matrix."""
        return self.C.N - 1 - k

    def to_json(self) -> dict:
        N = self.C.N
        return {
            "blocks": [{"block": i + 1, "kind": self.bg.cp.kinds[i].value,
                        "tag": self.tags[i].value, "m": self.bg.m_index[i],
                        "n": self.bg.n_index[i]} for i in range(N)],
            "poset": self.bg.poset.to_json(),
            "C": self.C.to_json(),
            "kweb": self.web.to_json(),
            "K1": [{"block": self.block_of_c(k) + 1, "rank": b.rank}
                   for k, b in self.kernels.items()],
            "unit_class": list(self.unit),
            "K0_full": str(im.cokernel(self.C.M)),
        }


def reduced_invariant(bg: BlockedGraphForm) -> ReducedInvariant:
    if bg.level < 2:
        raise ValueError("graph must be in double- or triple-circle form")
    B = bg.bullet()
    C = c_matrix(B)
    web = kweb(C)
    kernels = {k: im.kernel(C.block(k, k)) for k in range(C.N)}
    tags = tuple(_TAGS[k] for k in bg.cp.kinds)
    pres = im.cokernel(C.M)
    unit = tuple(pres.coords([1] * C.M.shape[0]))
    return ReducedInvariant(bg, C, web, kernels, tags, unit)


# ---------------------------------------------------------------------------
# fingerprints


def block_records(ri: ReducedInvariant) -> dict:
    """Invariant data keyed by graph-block labels."""
    N = ri.C.N
    to_b = lambda c: frozenset(N - 1 - k for k in c)
    return {
        "leq": tuple(tuple(ri.bg.poset.le(i, j) for j in range(N)) for i in range(N)),
        "tags": tuple(t.value for t in ri.tags),
        "cok": {to_b(c): g.signature() for c, g in ri.web.cok.items()},
        "ker": {N - 1 - k: b.rank for k, b in ri.kernels.items()},
    }


def _encode(rec: dict, perm: Sequence[int]) -> tuple:
    """Record relabelled by block k -> perm[k]."""
    N = len(perm)
    inv = [0] * N
    for k, p in enumerate(perm):
        inv[p] = k
    leq = tuple(tuple(rec["leq"][inv[a]][inv[b]] for b in range(N)) for a in range(N))
    tags = tuple(rec["tags"][inv[a]] for a in range(N))
    cok = tuple(sorted((tuple(sorted(perm[x] for x in c)), sig) for c, sig in rec["cok"].items()))
    ker = tuple(rec["ker"][inv[a]] for a in range(N))
    return (leq, tags, cok, ker)


MAX_RELABELINGS = 50000


def fingerprint(ri: ReducedInvariant) -> tuple:
    """Relabelling-independent summary: poset, order tags, group signatures
    per convex set, and kernel ranks."""
    rec = block_records(ri)
    N = len(rec["tags"])
    local = [(rec["tags"][i], rec["cok"].get(frozenset([i])), rec["ker"][i],
              sum(rec["leq"][j][i] for j in range(N)), sum(rec["leq"][i]))
             for i in range(N)]
    order = sorted(range(N), key=lambda i: (repr(local[i]), i))
    groups = [list(g) for _, g in itertools.groupby(order, key=lambda i: repr(local[i]))]
    count = 1
    for g in groups:
        for k in range(2, len(g) + 1):
            count *= k
    if count > MAX_RELABELINGS:
        raise ValueError("too many symmetric blocks for a canonical fingerprint")
    best = None
    for choice in itertools.product(*(itertools.permutations(g) for g in groups)):
        flat = [x for part in choice for x in part]
        perm = [0] * N
        for pos, blk in enumerate(flat):
            perm[blk] = pos
        enc = _encode(rec, perm)
        if best is None or repr(enc) < repr(best):
            best = enc
    return best


def records_match(ri1: ReducedInvariant, ri2: ReducedInvariant, iso: Sequence[int]) -> str | None:
    """Mismatch reason when block k of the first is sent to block iso[k]."""
    r1, r2 = block_records(ri1), block_records(ri2)
    if _encode(r1, iso) != _encode(r2, list(range(len(iso)))):
        e1, e2 = _encode(r1, iso), _encode(r2, list(range(len(iso))))
        names = ("poset", "order tags", "cokernel groups", "kernel ranks")
        for name, a, b in zip(names, e1, e2):
            if a != b:
                return name
    return None


# ---------------------------------------------------------------------------
# bounded lifting


@dataclass(frozen=True)
class LiftResult:
    witness: EquivWitness | None
    tried: int
    exhausted: bool
    reason: str = ""

    @property
    def found(self) -> bool:
        return self.witness is not None


def _small_gl(k: int, bound: int) -> list[np.ndarray]:
    """Unimodular k x k matrices, identity first, ordered by distance from it."""
    if k == 0:
        return [im.zeros(0, 0)]
    out = []
    if k <= 2:
        rng = range(-bound, bound + 1) if bound > 0 else range(-1, 2)
        for entries in itertools.product(rng, repeat=k * k):
            M = im.mat([list(entries[r * k:(r + 1) * k]) for r in range(k)], (k, k))
            if abs(im.det(M)) == 1:
                out.append(M)
    else:
        for p in itertools.permutations(range(k)):
            for signs in itertools.product((1, -1), repeat=k):
                M = im.zeros(k, k)
                for r in range(k):
                    M[r, p[r]] = signs[r]
                out.append(M)
        base = list(out)
        for M in base[:1]:
            for i in range(k):
                for j in range(k):
                    if i != j:
                        for c in range(-bound, bound + 1):
                            if c:
                                out.append(im.mul(im.elementary(k, i, j, c), M))
    ident = im.identity(k)

    def cost(M):
        return (sum(abs(int(x)) for x in (M - ident).flat), repr(im.to_lists(M)))

    out.sort(key=cost)
    return out


@dataclass(frozen=True)
class _DiagCandidate:
    U: np.ndarray
    W: np.ndarray
    cost: int


def _diag_candidates(B: np.ndarray, B2: np.ndarray, pin_w: bool, bound: int,
                     limit: int) -> list[_DiagCandidate] | None:
    m, n = B.shape
    if m == 0:
        if pin_w:
            return [_DiagCandidate(im.zeros(0, 0), im.identity(n), 0)]
        return [_DiagCandidate(im.zeros(0, 0), G, k) for k, G in enumerate(_small_gl(n, bound))][:limit]
    s1, s2 = im.smith_normal_form(B), im.smith_normal_form(B2)
    if s1.factors != s2.factors:
        return None
    r = len(s1.factors)
    d = list(s1.factors)
    S1, T1 = s1.U, s1.V
    S2i = im.inverse_unimodular(s2.U)
    T2 = s2.V
    T1i = im.inverse_unimodular(T1)
    units = [k for k in range(r) if d[k] == 1]
    tors = [k for k in range(r) if d[k] > 1]

    # torsion automorphism choices: one unit per torsion coordinate
    tors_choices = []
    for k in tors:
        us = [u for u in range(1, d[k]) if gcd(u, d[k]) == 1]
        us.sort(key=lambda u: (min(u, d[k] - u), u))
        tors_choices.append(us)
    words = _torsion_transvections(r, d, tors)
    a22s = _small_gl(m - r, bound)
    c22s = _small_gl(n - r, bound) if not pin_w else [None]
    a12_ranges = [list(range(d[k])) for k in tors] if m - r else []
    flips = [False, True] if units else [False]
    out = []
    for tu in itertools.product(*tors_choices) if tors else [()]:
        a11 = im.identity(r)
        ok = True
        for k, u in zip(tors, tu):
            if u == 1:
                continue
            if u == d[k] - 1 and not units:
                a11[k, k] = -1
                continue
            if not units:
                ok = False
                break
            p = units[0]
            x = pow(u, -1, d[k])
            y = (x * u - 1) // d[k]
            a11[p, p], a11[p, k], a11[k, p], a11[k, k] = x, y, d[k], u
        if not ok:
            continue
        for (flip, tw) in itertools.product(flips, words):
            a11f = a11.copy()
            if flip:
                a11f[units[-1], :] = -a11f[units[-1], :]
            for E in tw[0]:
                a11f = im.mul(E, a11f)
            Dr = [d[k] for k in range(r)]
            c11 = im.zeros(r, r)
            good = True
            for i in range(r):
                for j in range(r):
                    num = int(a11f[i, j]) * Dr[j]
                    if num % Dr[i]:
                        good = False
                    c11[i, j] = num // Dr[i]
            if not good:
                continue
            a12_iter = itertools.product(*[itertools.product(rg, repeat=m - r) for rg in a12_ranges]) \
                if a12_ranges else [()]
            for a12rows in a12_iter:
                for ia, a22 in enumerate(a22s):
                    for ic, c22 in enumerate(c22s):
                        a = im.zeros(m, m)
                        a[:r, :r] = a11f
                        a[r:, r:] = a22
                        for row, k in zip(a12rows, tors):
                            for col, v in enumerate(row):
                                a[k, r + col] = v
                        c = im.zeros(n, n)
                        c[:r, :r] = c11
                        if pin_w:
                            # the only choice with W = 1 when n = 1
                            c22 = im.identity(n - r)
                            U = im.mul(S2i, a, S1)
                            Wc = im.mul(T2, _fill(c, c22, r), T1i)
                            if not im.equal(Wc, im.identity(n)):
                                continue
                        else:
                            Wc = im.mul(T2, _fill(c, c22, r), T1i)
                            U = im.mul(S2i, a, S1)
                        cost = (sum(min(u, d[k] - u) - 1 for k, u in zip(tors, tu)) + int(flip)
                                + tw[1] + ia + ic + sum(sum(rw) for rw in a12rows))
                        out.append(_DiagCandidate(U, Wc, cost))
                        if len(out) >= 4 * limit:
                            break
    if pin_w and not out:
        # W = 1 forces U B = B2; try U = S2^-1 a S1 with the pinned c
        return []
    out.sort(key=lambda c: (c.cost, repr(im.to_lists(c.U))))
    return out[:limit]


def _torsion_transvections(r: int, d: list[int], tors: list[int]) -> list[tuple[list, int]]:
    """Words of at most two transvections x_i += c (d_i / g) x_j between
    torsion coordinates, g = gcd(d_i, d_j); each lifts to an elementary
    matrix.  Entries are (matrices, cost)."""
    single = []
    for i in tors:
        for j in tors:
            if i == j:
                continue
            g = gcd(d[i], d[j])
            for c in range(1, g):
                single.append((im.elementary(r, i, j, c * d[i] // g), min(c, g - c)))
    words = [([], 0)] + [([E], k) for E, k in single]
    words += [([E1, E2], k1 + k2) for E1, k1 in single for E2, k2 in single]
    return words


def _fill(c: np.ndarray, c22: np.ndarray, r: int) -> np.ndarray:
    c = c.copy()
    if c22 is not None and c22.size:
        c[r:, r:] = c22
    return c


class _OffDiagonalSystem:
    """All off-diagonal blocks of U and W in U B = B2 W, solved at once.

    The coefficient matrix does not depend on the diagonal blocks, so its
    Smith form is computed once."""

    def __init__(self, B: BlockMatrix, B2: BlockMatrix):
        self.B, self.B2 = B, B2
        P = B.poset
        N = B.N
        self.unknowns = []
        for i in range(N):
            for k in range(N):
                if P.lt(i, k):
                    self.unknowns.append(("U", i, k))
                    self.unknowns.append(("W", i, k))
        self.index = {}
        pos = 0
        for kind, i, k in self.unknowns:
            rows = B.m[i] if kind == "U" else B.n[i]
            cols = B.m[k] if kind == "U" else B.n[k]
            self.index[(kind, i, k)] = (pos, rows, cols)
            pos += rows * cols
        self.nvars = pos
        self.eqs = [(i, j) for i in range(N) for j in range(N) if P.lt(i, j)]
        neq = sum(B.m[i] * B.n[j] for i, j in self.eqs)
        A = im.zeros(neq, self.nvars)
        row = 0
        self.eq_rows = {}
        for i, j in self.eqs:
            self.eq_rows[(i, j)] = row
            for p in range(B.m[i]):
                for q in range(B.n[j]):
                    for k in range(N):
                        if P.lt(i, k) and P.le(k, j):
                            base, _, cols = self.index[("U", i, k)]
                            Bkj = B.block(k, j)
                            for s in range(B.m[k]):
                                A[row, base + p * cols + s] += Bkj[s, q]
                        if P.le(i, k) and P.lt(k, j):
                            base, _, cols = self.index[("W", k, j)]
                            Bik = B2.block(i, k)
                            for s in range(B.n[k]):
                                A[row, base + s * cols + q] -= Bik[p, s]
                    row += 1
        self.A = A
        self.snf = im.smith_normal_form(A) if A.size else None

    def solve(self, Ud: list, Wd: list) -> tuple[np.ndarray, np.ndarray] | None:
        B, B2 = self.B, self.B2
        rhs = []
        for i, j in self.eqs:
            blk = im.mul(B2.block(i, j), Wd[j]) - im.mul(Ud[i], B.block(i, j))
            rhs.extend(int(x) for x in blk.flat)
        x = self._solve(rhs)
        if x is None:
            return None
        mo, no = offsets(B.m), offsets(B.n)
        U = im.zeros(sum(B.m), sum(B.m))
        W = im.zeros(sum(B.n), sum(B.n))
        for i in range(B.N):
            U[mo[i]:mo[i] + B.m[i], mo[i]:mo[i] + B.m[i]] = Ud[i]
            W[no[i]:no[i] + B.n[i], no[i]:no[i] + B.n[i]] = Wd[i]
        for (kind, i, k), (base, rows, cols) in self.index.items():
            vals = x[base:base + rows * cols]
            blk = im.mat([vals[r * cols:(r + 1) * cols] for r in range(rows)], (rows, cols))
            if kind == "U":
                U[mo[i]:mo[i] + rows, mo[k]:mo[k] + cols] = blk
            else:
                W[no[i]:no[i] + rows, no[k]:no[k] + cols] = blk
        return U, W

    def _solve(self, rhs: list[int]) -> list[int] | None:
        if not rhs:
            return [0] * self.nvars
        if self.nvars == 0:
            return [] if all(v == 0 for v in rhs) else None
        res = self.snf
        c = im.mul(res.U, _col(rhs))
        y = [0] * self.nvars
        for k in range(len(rhs)):
            ck = int(c[k, 0])
            if k < res.rank:
                dk = res.factors[k]
                if ck % dk:
                    return None
                y[k] = ck // dk
            elif ck:
                return None
        return [int(v) for v in im.mul(res.V, _col(y))[:, 0]]


def lift_iso_bounded(B: BlockMatrix, B2: BlockMatrix, bound: int = 3,
                     pin_v: Sequence[int] | None = None, sl_blocks: Sequence[int] = (),
                     max_tries: int = 20000, accept=None) -> LiftResult:
    """Search for (U, V) in GL_P with U B V = B2.

    ``pin_v`` lists blocks where V{i} must be the identity (default: blocks
    with n_i = 1).  ``sl_blocks`` require determinant 1 on U{i} and V{i}.
    ``bound`` caps entries of the enumerated diagonal automorphisms.
    ``accept`` is an optional extra predicate on the witness.  Failure is
    not a proof of non-existence.
    """
    if B.poset != B2.poset or B.m != B2.m or B.n != B2.n:
        raise ValueError("shape mismatch")
    N = B.N
    if pin_v is None:
        pin_v = [i for i in range(N) if B.n[i] == 1]
    per_block = []
    per_limit = max(2, int(round(max_tries ** (1.0 / max(1, N)))) + 2)
    for i in range(N):
        cands = _diag_candidates(B.block(i, i), B2.block(i, i), i in pin_v, bound,
                                 per_limit * 4)
        if cands is None:
            return LiftResult(None, 0, False, f"block {i + 1}: diagonal cokernels differ")
        if i in sl_blocks:
            cands = [c for c in cands if im.det(c.U) == 1 and im.det(c.W) == 1]
        if not cands:
            return LiftResult(None, 0, True, f"block {i + 1}: no diagonal candidate")
        per_block.append(cands)
    system = _OffDiagonalSystem(B, B2)
    tried = 0
    for combo in _combos(per_block, max_tries):
        tried += 1
        sol = system.solve([c.U for c in combo], [c.W for c in combo])
        if sol is None:
            continue
        U, W = sol
        V = im.inverse_unimodular(W) if W.shape[0] else W
        w = EquivWitness(U, V, B, B2)
        if w.check().verdict.value == "neither":
            continue
        if accept is not None and not accept(w):
            continue
        return LiftResult(w, tried, False)
    return LiftResult(None, tried, True, "budget exhausted")


def _combos(per_block: list[list[_DiagCandidate]], max_tries: int):
    """Combinations in order of total cost, then lexicographic index."""
    sizes = [len(c) for c in per_block]
    total = 1
    for s in sizes:
        total *= s
    if total <= max_tries:
        idx = list(itertools.product(*(range(s) for s in sizes)))
        idx.sort(key=lambda t: (sum(per_block[b][k].cost for b, k in enumerate(t)), t))
        for t in idx:
            yield [per_block[b][k] for b, k in enumerate(t)]
        return
    # breadth-first over index sums when the product is too large
    count = 0
    for level in range(sum(sizes)):
        for t in _index_tuples(sizes, level):
            yield [per_block[b][k] for b, k in enumerate(t)]
            count += 1
            if count >= max_tries:
                return


def _index_tuples(sizes, total):
    if not sizes:
        if total == 0:
            yield ()
        return
    for k in range(min(sizes[0] - 1, total) + 1):
        for rest in _index_tuples(sizes[1:], total - k):
            yield (k,) + rest
