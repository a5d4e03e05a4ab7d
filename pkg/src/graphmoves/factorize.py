"""Positive factorizations of SL equivalences and the GL to SL repair.

A chain is a list of basic elementary steps (one off-diagonal entry +1 or
-1) acting on the left or right, each intermediate matrix staying in the
positive class.  Indices are 0-based throughout this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd
from typing import Callable, Sequence

import numpy as np

from . import intmat as im
from .blocks import (BlockedGraphForm, BlockMatrix, EquivWitness, Verdict, blocked,
                     canonical_check, canonical_fixups, iota_r, mplus_check, offsets,
                     square, verify_equiv, _expand_block)
from .errors import HypothesisViolated

# The 3-cycle [[0,1,0],[0,0,1],[1,0,0]] as a product C0 C1 C2 C3 C4 C5 of
# basic elementary matrices; every suffix product is nonnegative with no
# zero rows.
THREE_CYCLE = [
    [[1, 0, 0], [0, 1, 0], [0, -1, 1]],
    [[1, 0, 0], [-1, 1, 0], [0, 0, 1]],
    [[1, 0, -1], [0, 1, 0], [0, 0, 1]],
    [[1, 1, 0], [0, 1, 0], [0, 0, 1]],
    [[1, 0, 0], [0, 1, 0], [1, 0, 1]],
    [[1, 0, 0], [0, 1, 1], [0, 0, 1]],
]


def three_cycle_factors() -> list[np.ndarray]:
    return [im.mat(c, (3, 3)) for c in THREE_CYCLE]


def basic_entry(E: np.ndarray) -> tuple[int, int, int] | None:
    """(s, t, c) when E is the identity plus c at (s, t) with c = +-1."""
    D = E - im.identity(E.shape[0])
    nz = [(int(a), int(b)) for a, b in zip(*np.nonzero(D))]
    if len(nz) != 1:
        return None
    s, t = nz[0]
    c = int(D[s, t])
    if s == t or c not in (1, -1):
        return None
    return s, t, c


# ---------------------------------------------------------------------------
# chains


@dataclass(frozen=True, eq=False)
class ElementaryStep:
    """Left step: row s += c * row t.  Right step: column t += c * column s.
    Either way the elementary matrix is I + c e_s e_t^T."""

    side: str
    s: int
    t: int
    c: int
    snapshot: np.ndarray
    tag: str = ""

    def matrix(self, size: int) -> np.ndarray:
        return im.elementary(size, self.s, self.t, self.c)

    def to_json(self) -> dict:
        return {"side": self.side, "s": self.s, "t": self.t, "c": self.c, "tag": self.tag,
                "snapshot": im.to_lists(self.snapshot)}


def _act(M: np.ndarray, side: str, s: int, t: int, c: int) -> np.ndarray:
    M = M.copy()
    if side == "left":
        M[s, :] += c * M[t, :]
    else:
        M[:, t] += c * M[:, s]
    return M


@dataclass(eq=False)
class PositiveChain:
    start: np.ndarray
    end: np.ndarray
    steps: list
    U: np.ndarray
    V: np.ndarray
    groupings: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.steps)

    def recompose(self) -> tuple[np.ndarray, np.ndarray]:
        m, n = self.start.shape
        U, V = im.identity(m), im.identity(n)
        for st in self.steps:
            if st.side == "left":
                U = im.mul(st.matrix(m), U)
            else:
                V = im.mul(V, st.matrix(n))
        return U, V

    def check(self, member: Callable[[np.ndarray], bool]) -> bool:
        M = self.start
        if not member(M):
            return False
        for st in self.steps:
            M = _act(M, st.side, st.s, st.t, st.c)
            if not im.equal(M, st.snapshot) or not member(M):
                return False
        U, V = self.recompose()
        return (im.equal(M, self.end) and im.equal(U, self.U) and im.equal(V, self.V)
                and im.equal(im.mul(U, self.start, V), self.end))

    def to_json(self) -> dict:
        return {"start": im.to_lists(self.start), "start_shape": list(self.start.shape),
                "end": im.to_lists(self.end), "U": im.to_lists(self.U), "V": im.to_lists(self.V),
                "steps": [{"side": s.side, "s": s.s, "t": s.t, "c": s.c, "tag": s.tag}
                          for s in self.steps],
                "groupings": {k: [im.to_lists(a), im.to_lists(b)]
                              for k, (a, b) in self.groupings.items()}}

    @classmethod
    def from_json(cls, d: dict) -> "PositiveChain":
        shape = tuple(d["start_shape"])
        start = im.mat(d["start"], shape)
        M = start
        steps = []
        for s in d["steps"]:
            M = _act(M, s["side"], s["s"], s["t"], s["c"])
            steps.append(ElementaryStep(s["side"], s["s"], s["t"], s["c"], M, s.get("tag", "")))
        return cls(start, im.mat(d["end"], shape), steps,
                   im.mat(d["U"], (shape[0], shape[0])), im.mat(d["V"], (shape[1], shape[1])))


def positive(M: np.ndarray) -> bool:
    return bool(M.size) and all(int(x) > 0 for x in M.flat)


class _Builder:
    """Applies steps to a current matrix, checking membership after each."""

    def __init__(self, M: np.ndarray, member: Callable[[np.ndarray], bool]):
        self.start = M.copy()
        self.M = M.copy()
        self.member = member
        self.steps: list[ElementaryStep] = []
        self.U = im.identity(M.shape[0])
        self.V = im.identity(M.shape[1])

    def step(self, side: str, s: int, t: int, c: int, tag: str = ""):
        if c not in (1, -1) or s == t:
            raise ValueError("not a basic elementary step")
        M = _act(self.M, side, s, t, c)
        if not self.member(M):
            raise HypothesisViolated(f"intermediate leaves the positive class ({tag or side})")
        self.M = M
        if side == "left":
            self.U = im.mul(im.elementary(M.shape[0], s, t, c), self.U)
        else:
            self.V = im.mul(self.V, im.elementary(M.shape[1], s, t, c))
        self.steps.append(ElementaryStep(side, s, t, c, M, tag))

    def left(self, s, t, c, tag=""):
        self.step("left", s, t, c, tag)

    def right(self, s, t, c, tag=""):
        self.step("right", s, t, c, tag)

    def repeat(self, side, s, t, k, tag=""):
        for _ in range(abs(k)):
            self.step(side, s, t, 1 if k > 0 else -1, tag)

    def replay(self, moves, tag=""):
        for side, s, t, c in moves:
            self.step(side, s, t, c, tag)

    def chain(self) -> PositiveChain:
        return PositiveChain(self.start, self.M.copy(), list(self.steps), self.U.copy(),
                             self.V.copy())


def _moves(steps) -> list[tuple]:
    return [(st.side, st.s, st.t, st.c) for st in steps]


def _reversed(moves) -> list[tuple]:
    return [(side, s, t, -c) for side, s, t, c in reversed(moves)]


def _transposed(moves) -> list[tuple]:
    return [("right" if side == "left" else "left", t, s, c) for side, s, t, c in moves]


def _min_count(x: int, y: int) -> int:
    """Least k >= 0 with x + k*y > 0, for y > 0."""
    return 0 if x > 0 else (-x) // y + 1


# ---------------------------------------------------------------------------
# single positive block


def _zero_row_free(W: np.ndarray, B: np.ndarray, row: int) -> bool:
    return any(int(x) != 0 for x in im.mul(W[[row], :], B).flat)


def _reduce_to_identity(U: np.ndarray, B: np.ndarray, prefix) -> list[tuple] | None:
    W = U.copy()
    K = W.shape[0]
    ops = []

    def apply(s, t, c):
        W[s, :] += c * W[t, :]
        if not _zero_row_free(W, B, s):
            W[s, :] -= c * W[t, :]
            raise _ZeroRow
        ops.append((s, t, c))

    def repeat(s, t, k):
        for _ in range(abs(k)):
            apply(s, t, 1 if k > 0 else -1)

    try:
        for s, t, c in prefix:
            apply(s, t, c)
        for col in range(K):
            while True:
                rows = [r for r in range(col, K) if W[r, col] != 0]
                if rows == [col] and abs(int(W[col, col])) == 1:
                    break
                piv = min(rows, key=lambda r: (abs(int(W[r, col])), r))
                others = [r for r in rows if r != piv]
                if others:
                    r = others[0]
                    q = int(W[r, col]) // int(W[piv, col])
                    repeat(r, piv, -q)
                else:
                    apply(col, piv, 1)
            if W[col, col] == -1:
                if col == K - 1:
                    return None
                d = col + 1
                apply(d, col, -1)
                repeat(col, d, 2)
                apply(d, col, -1)
        for col in range(K - 1, -1, -1):
            for r in range(col):
                if W[r, col] != 0:
                    repeat(r, col, -int(W[r, col]))
    except _ZeroRow:
        return None
    return ops


class _ZeroRow(Exception):
    pass


def zero_row_free_factorization(B: np.ndarray, U: np.ndarray) -> list[tuple[int, int, int]]:
    """Basic elementary (s, t, c), applied in order, with product U and no
    zero row in any partial product times B."""
    K = U.shape[0]
    if im.det(U) != 1:
        raise HypothesisViolated("U must have determinant 1")
    if not all(_zero_row_free(im.identity(K), B, r) for r in range(K)):
        raise HypothesisViolated("B has a zero row")
    UB = im.mul(U, B)
    if any(not any(int(x) for x in UB[r]) for r in range(K)):
        raise HypothesisViolated("UB has a zero row")
    prefixes = [[]] + [[(a, b, 1)] for a in range(K) for b in range(K) if a != b] \
        + [[(a, b, -1)] for a in range(K) for b in range(K) if a != b]
    for pre in prefixes:
        ops = _reduce_to_identity(U, B, pre)
        if ops is not None:
            return [(s, t, -c) for s, t, c in reversed(ops)]
    raise HypothesisViolated("no zero-row-free factorization found")


def _pick_column(d: np.ndarray, allowed) -> int | None:
    cands = [k for k in range(len(d)) if d[k] > 0 and (allowed is None or k in allowed)]
    if not cands:
        return None
    return max(cands, key=lambda k: (int(d[k]), -k))


def _positivize_row(bd: _Builder, d: np.ndarray, allowed, tag: str):
    """Add one column to the others so that row vector d times Q is positive."""
    col = _pick_column(d, allowed)
    if col is None:
        raise HypothesisViolated("no usable positive column")
    for k in range(len(d)):
        if k != col:
            bd.repeat("right", col, k, _min_count(int(d[k]), int(d[col])), tag)


def _basic_positive(bd: _Builder, s: int, t: int, c: int, allowed) -> np.ndarray:
    """One basic left step made positive; returns the signed permutation S with
    (S E, Q) applied, where Q is the column work done here."""
    K = bd.M.shape[0]
    E = im.elementary(K, s, t, c)
    if c == 1:
        bd.left(s, t, 1, "row")
        return im.identity(K)
    d = bd.M[s, :] - bd.M[t, :]
    if any(x > 0 for x in d):
        _positivize_row(bd, d, allowed, "column")
        bd.left(s, t, -1, "row")
        return im.identity(K)
    _positivize_row(bd, -d, allowed, "column")
    bd.left(t, s, -1, "row")
    bd.left(s, t, 1, "row")
    L = im.mul(im.elementary(K, s, t, 1), im.elementary(K, t, s, -1))
    return im.mul(L, im.inverse_unimodular(E))


def _permutation(S: np.ndarray) -> list[int] | None:
    K = S.shape[0]
    sigma = []
    for r in range(K):
        nz = [k for k in range(K) if S[r, k] != 0]
        if len(nz) != 1 or S[r, nz[0]] != 1:
            return None
        sigma.append(nz[0])
    return sigma


def _three_cycles(sigma: list[int]) -> list[tuple[int, int, int]]:
    """3-cycles (a, b, c) (new row a = old b, b = old c, c = old a) whose
    successive application sends row sigma[r] to position r."""
    K = len(sigma)
    cur = list(range(K))
    out = []
    for r in range(max(0, K - 2)):
        if cur[r] == sigma[r]:
            continue
        p = cur.index(sigma[r])
        q = next(x for x in range(r + 1, K) if x != p)
        a, b, c = r, p, q
        cur[a], cur[b], cur[c] = cur[b], cur[c], cur[a]
        out.append((a, b, c))
    if cur != sigma:
        raise HypothesisViolated("odd permutation")
    return out


def _apply_three_cycle(bd: _Builder, a: int, b: int, c: int):
    idx = (a, b, c)
    for C in reversed(three_cycle_factors()):
        s, t, v = basic_entry(C)
        bd.left(idx[s], idx[t], v, "three-cycle")


def _row_positive_steps(bd: _Builder, U: np.ndarray, allowed=None):
    """Drive bd from B to U B through positive matrices (right-side work is
    undone at the end)."""
    B0 = bd.M.copy()
    K1, K2 = B0.shape
    if K1 < 3 or K2 < 3:
        raise HypothesisViolated("needs at least 3 rows and 3 columns")
    if not positive(B0):
        raise HypothesisViolated("B must be positive")
    if im.rank(B0) < 2:
        raise HypothesisViolated("B must have rank at least 2")
    if im.det(U) != 1:
        raise HypothesisViolated("U must have determinant 1")
    if not positive(im.mul(U, B0)):
        raise HypothesisViolated("UB must be positive")
    start = len(bd.steps)
    S = im.identity(K1)
    for s, t, c in zero_row_free_factorization(B0, U):
        E = im.elementary(K1, s, t, c)
        Ep = im.mul(S, E, im.inverse_unimodular(S))
        s2, t2, c2 = basic_entry(Ep)
        Sj = _basic_positive(bd, s2, t2, c2, allowed)
        S = im.mul(Sj, S)
    sigma = _permutation(im.inverse_unimodular(S))
    if sigma is None:
        raise HypothesisViolated("accumulated sign matrix is not a permutation")
    for a, b, c in _three_cycles(sigma):
        _apply_three_cycle(bd, a, b, c)
    rights = [m for m in _moves(bd.steps[start:]) if m[0] == "right"]
    bd.replay(_reversed(rights), "undo")
    if not im.equal(bd.M, im.mul(U, B0)):
        raise RuntimeError("row-positive factorization did not reach U B")


def factor_row_positive(B: np.ndarray, U: np.ndarray, allowed_cols=None) -> PositiveChain:
    """Chain realizing (U, I): B -> U B with every intermediate positive."""
    B = im.mat(B)
    U = im.mat(U)
    bd = _Builder(B, positive)
    _row_positive_steps(bd, U, allowed_cols)
    return bd.chain()


def _two_sided(bd: _Builder, B2: np.ndarray, U: np.ndarray, W: np.ndarray, allowed=None):
    """(U, W^-1): bd.M -> B2 where U bd.M = B2 W and U bd.M has a positive entry."""
    B = bd.M.copy()
    UB = im.mul(U, B)
    pos = [(int(UB[i, j]), -i, -j) for i in range(UB.shape[0]) for j in range(UB.shape[1])
           if UB[i, j] > 0 and (allowed is None or j in allowed)]
    if not pos:
        raise HypothesisViolated("U B has no usable positive entry")
    _, i, j = max(pos)
    i, j = -i, -j
    start = len(bd.steps)
    for k in range(B.shape[1]):
        if k != j:
            bd.repeat("right", j, k, _min_count(int(UB[i, k]), int(UB[i, j])), "column")
    Q = bd.V if start == 0 else _right_product(bd.steps[start:], B.shape[1])
    UBQ = im.mul(U, bd.M)
    pmoves = []
    for r in range(B.shape[0]):
        if r == i:
            continue
        cnt = max(_min_count(int(UBQ[r, k]), int(UBQ[i, k])) for k in range(B.shape[1]))
        pmoves.extend([("left", r, i, 1)] * cnt)
    P = im.identity(B.shape[0])
    for _, s, t, c in pmoves:
        P = im.mul(im.elementary(B.shape[0], s, t, c), P)
    Us = im.mul(P, U)
    Ws = im.mul(W, Q)
    B2s = im.mul(P, B2)
    _row_positive_steps(bd, Us, allowed)
    bt = _Builder(B2s.T.copy(), positive)
    _row_positive_steps(bt, Ws.T.copy())
    bd.replay(_reversed(_transposed(_moves(bt.steps))), "transpose")
    bd.replay(_reversed(pmoves), "row")
    if not im.equal(bd.M, B2):
        raise RuntimeError("two-sided factorization did not reach the target")


def _right_product(steps, n: int) -> np.ndarray:
    V = im.identity(n)
    for st in steps:
        if st.side == "right":
            V = im.mul(V, st.matrix(n))
    return V


def _sl_smith(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """X, Y of determinant 1 with X B Y = diag(1, 1, F)."""
    res = im.smith_normal_form(B)
    X, Y = res.U.copy(), res.V.copy()
    if len(res.factors) < 2 or res.factors[1] != 1:
        raise HypothesisViolated("Smith form needs two unit invariant factors")
    if im.det(X) == -1:
        X[2, :] = -X[2, :]
    if im.det(Y) == -1:
        Y[:, 2] = -Y[:, 2]
    return X, Y


def _sign_agrees(A: np.ndarray, R: np.ndarray) -> bool:
    return all((int(r) > 0 and int(a) > 0) or (int(r) < 0 and int(a) < 0)
               for a, r in zip(A.flat, R.flat) if int(r) != 0)


def _mixed_row(R2: np.ndarray):
    for size in range(1, 50):
        for a in range(-size, size + 1):
            for b in range(-size, size + 1):
                if max(abs(a), abs(b)) != size or gcd(a, b) != 1:
                    continue
                row = a * R2[0] + b * R2[1]
                if any(x > 0 for x in row) and any(x < 0 for x in row):
                    g, x, y = _egcd(a, b)
                    # a*x + b*y = 1, so [[a, b], [-y, x]] has determinant 1
                    return im.mat([[a, b], [-y, x]], (2, 2)), row
    raise HypothesisViolated("no mixed-sign combination of the first two rows")


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    if b == 0:
        return (a, 1, 0) if a >= 0 else (-a, -1, 0)
    g, x, y = _egcd(b, a % b)
    return g, y, x - (a // b) * y


MAX_M = 10 ** 6


def factor_block_positive(B: np.ndarray, U: np.ndarray, V: np.ndarray,
                          allowed_cols=None) -> PositiveChain:
    """Chain from B to U B V through positive matrices of the same shape."""
    B, U, V = im.mat(B), im.mat(U), im.mat(V)
    B2 = im.mul(U, B, V)
    if not positive(B) or not positive(B2):
        raise HypothesisViolated("both ends must be positive")
    if im.det(U) != 1 or im.det(V) != 1:
        raise HypothesisViolated("U and V must have determinant 1")
    bd = _Builder(B, positive)
    if im.equal(U, im.identity(U.shape[0])) and im.equal(V, im.identity(V.shape[0])):
        return bd.chain()
    W = im.inverse_unimodular(V)
    if any(x > 0 for x in im.mul(U, B).flat):
        _two_sided(bd, B2, U, W, allowed_cols)
        return bd.chain()
    K1, K2 = B.shape
    X, Y = _sl_smith(B)
    Xi, Yi = im.inverse_unimodular(X), im.inverse_unimodular(Y)
    Hp, r = _mixed_row(im.mul(X, B)[:2, :])
    c = Xi[:, 0]
    cr = np.outer(c, r).astype(object)
    Ucr = im.mul(U, cr)
    for m in range(1, MAX_M):
        Hm = im.mul(im.mat([[m, -1], [1, 0]], (2, 2)), Hp)
        G1 = im.identity(K1)
        G1[:2, :2] = Hm
        G2 = im.identity(K2)
        G2[:2, :2] = Hm
        A = im.mul(Xi, G1, X)
        AB = im.mul(A, B)
        UAB = im.mul(U, AB)
        if (_sign_agrees(AB, m * cr) and _sign_agrees(UAB, Ucr)
                and any(x > 0 for x in AB.flat) and any(x > 0 for x in UAB.flat)):
            break
    else:
        raise HypothesisViolated("no auxiliary H_m found")
    Cm = im.mul(Y, im.inverse_unimodular(G2), Yi)
    aux = _Builder(B, positive)
    _two_sided(aux, B, A, im.inverse_unimodular(Cm), allowed_cols)
    bd.replay(_reversed(_moves(aux.steps)), "auxiliary")
    _two_sided(bd, B2, im.mul(U, A), im.inverse_unimodular(im.mul(Cm, V)), allowed_cols)
    ch = bd.chain()
    ch.groupings["auxiliary"] = (A, Cm)
    return ch


# ---------------------------------------------------------------------------
# block matrices


class _View:
    """Orientation of a builder: identity, or transposed with the opposite
    order (left steps on the view are right steps on the matrix)."""

    def __init__(self, bd: _Builder, B: BlockMatrix, transposed: bool, allowed_cols=None):
        self.bd, self.B, self.t = bd, B, transposed
        rb = [i for i in range(B.N) for _ in range(B.m[i])]
        cb = [i for i in range(B.N) for _ in range(B.n[i])]
        self.rb, self.cb = (cb, rb) if transposed else (rb, cb)
        self.allowed = None if transposed else allowed_cols

    @property
    def M(self) -> np.ndarray:
        return self.bd.M.T if self.t else self.bd.M

    def lt(self, a: int, b: int) -> bool:
        return self.B.poset.lt(b, a) if self.t else self.B.poset.lt(a, b)

    def rank(self, blk: int) -> int:
        return -blk if self.t else blk

    def left(self, s, t, c, tag):
        if self.t:
            self.bd.right(t, s, c, tag)
        else:
            self.bd.left(s, t, c, tag)

    def right(self, s, t, c, tag):
        if self.t:
            self.bd.left(t, s, c, tag)
        else:
            self.bd.right(s, t, c, tag)

    def required(self, p: int, q: int) -> bool:
        a, b = self.rb[p], self.cb[q]
        if a == b:
            real = self.B.m[a]
            return real > 1
        return self.lt(a, b)

    def can_add(self, r: int, q: int) -> bool:
        if self.allowed is not None and r not in self.allowed:
            return False
        return self.lt(self.cb[r], self.cb[q])


def _apply_left_factor(view: _View, entries: dict, tag: str):
    """Left-multiply by I + sum v e_p e_q^T (rows p in one block, q in
    another or a single entry) with compensating column additions."""
    for (p, q), v in sorted(entries.items()):
        if v > 0:
            for _ in range(v):
                view.left(p, q, 1, tag)
    neg = [(p, q, v) for (p, q), v in sorted(entries.items()) if v < 0]
    if not neg:
        return
    R = sorted({p for p, _, _ in neg})

    def predicted():
        M = view.M
        N = M.copy()
        for p, q, v in neg:
            N[p, :] += v * M[q, :]
        return N

    N = predicted()
    ncols = N.shape[1]
    for q in sorted(range(ncols), key=lambda x: (view.rank(view.cb[x]), x)):
        bad = [p for p in R if view.required(p, q) and N[p, q] <= 0]
        if not bad:
            continue
        cands = [r for r in sorted(range(ncols), key=lambda x: (view.rank(view.cb[x]), x))
                 if view.can_add(r, q) and all(N[p, r] >= 0 for p in R)
                 and all(N[p, r] > 0 for p in bad)]
        if not cands:
            raise HypothesisViolated("no compensating column for a subtraction")
        r = cands[0]
        cnt = max(_min_count(int(N[p, q]), int(N[p, r])) for p in bad)
        for _ in range(cnt):
            view.right(r, q, 1, "compensate")
        N = predicted()
    for p, q, v in neg:
        for _ in range(-v):
            view.left(p, q, -1, tag)


def _unipotent_factors(F: np.ndarray, blk: Sequence[int], rank) -> list[dict]:
    """Single-block factors of a block unipotent F, in application order."""
    F = F.copy()
    K = F.shape[0]
    killed = []
    blocks = sorted(set(blk), key=rank)
    for b in blocks:
        cols = [x for x in range(K) if blk[x] == b]
        for a in sorted(set(blk), key=rank):
            if a == b:
                continue
            rows = [x for x in range(K) if blk[x] == a]
            entries = {(p, q): int(F[p, q]) for p in rows for q in cols if F[p, q] != 0}
            if not entries:
                continue
            X = im.zeros(K, K)
            for (p, q), v in entries.items():
                X[p, q] = v
            F = F - im.mul(X, F)
            killed.append(entries)
    if not im.equal(F, im.identity(K)):
        raise HypothesisViolated("matrix is not block unipotent")
    return list(reversed(killed))


def _member(B: BlockMatrix) -> Callable[[np.ndarray], bool]:
    return lambda M: mplus_check(B.with_matrix(M))


def factor_positive_equivalence(B: BlockMatrix, B2: BlockMatrix, U: np.ndarray,
                                V: np.ndarray, allowed_cols=None) -> PositiveChain:
    """Chain of basic steps from B to B2 = U B V staying in the positive class.

    ``allowed_cols`` restricts which columns may be added to others."""
    U, V = im.mat(U), im.mat(V)
    for name, X in (("source", B), ("target", B2)):
        fails = mplus_check(X, detail=True)
        if fails:
            raise HypothesisViolated(f"{name} not in the positive class: {fails[0]}")
    if any(n == 0 for n in B.n):
        raise HypothesisViolated("every n_i must be nonzero")
    rep = verify_equiv(U, B, V, B2)
    if rep.verdict != Verdict.SLP:
        raise HypothesisViolated(f"not an SL equivalence: {rep.reason or rep.verdict.value}")
    member = _member(B)
    bd = _Builder(B.M, member)
    Ub, Vb = square(B.poset, B.m, U), square(B.poset, B.n, V)
    mo, no = offsets(B.m), offsets(B.n)
    ident = _View(bd, B, False, allowed_cols)
    trans = _View(bd, B, True)
    for i in range(B.N):
        if B.m[i] <= 1:
            continue
        local_allowed = None
        if allowed_cols is not None:
            local_allowed = {c - no[i] for c in allowed_cols if no[i] <= c < no[i] + B.n[i]}
        ch = factor_block_positive(B.block(i, i), Ub.block(i, i), Vb.block(i, i), local_allowed)
        for st in ch.steps:
            if st.side == "left":
                _apply_left_factor(ident, {(mo[i] + st.s, mo[i] + st.t): st.c}, "diagonal")
            else:
                _apply_left_factor(trans, {(no[i] + st.t, no[i] + st.s): st.c}, "diagonal")
    X, Y = bd.U.copy(), bd.V.copy()
    Ur = im.mul(U, im.inverse_unimodular(X))
    rb = [i for i in range(B.N) for _ in range(B.m[i])]
    for F in _unipotent_factors(Ur, rb, lambda b: b):
        _apply_left_factor(ident, F, "off-diagonal")
    Z = im.mul(im.inverse_unimodular(V), bd.V)
    b2 = _Builder(B2.M, member)
    t2 = _View(b2, B, True)
    cb = [i for i in range(B.N) for _ in range(B.n[i])]
    for F in _unipotent_factors(Z.T.copy(), cb, lambda b: -b):
        _apply_left_factor(t2, F, "off-diagonal")
    lefts = [m for m in _moves(b2.steps) if m[0] == "left"]
    bd.replay(lefts, "row")
    if not im.equal(bd.M, b2.M):
        raise RuntimeError("the two halves of the chain do not meet")
    bd.replay(_reversed(_moves(b2.steps)), "off-diagonal")
    if not im.equal(bd.M, B2.M):
        raise RuntimeError("chain does not reach the target")
    ch = bd.chain()
    ch.groupings["diagonal"] = (X, Y)
    ch.groupings["remainder"] = (Ur, im.mul(im.inverse_unimodular(Y), V))
    return ch


# ---------------------------------------------------------------------------
# GL to SL repair on graphs


@dataclass(eq=False)
class Repair:
    F1: BlockedGraphForm
    F2: BlockedGraphForm
    witness: EquivWitness
    trace1: object
    trace2: object
    notes: list = field(default_factory=list)


def _successor_free(B: BlockMatrix, i: int) -> bool:
    return not any(B.poset.lt(i, j) for j in range(B.N))


def _expand_twice(bg: BlockedGraphForm, i: int, trace):
    r = [0] * bg.N
    r[i] = 1
    bh, mv, w1 = _expand_block(bg, i)
    trace.record(mv, bh.graph, w1)
    bk, mv, w2 = _expand_block(bh, i)
    trace.record(mv, bk.graph, w2)
    return bk, w1.then(w2, r)


def _splice(bg: BlockedGraphForm, i: int, trace):
    from .moves import MoveSpec, cuntz_splice_once_witness

    g = bg.graph
    u = next(x for x in bg.block_vertices(i) if g.is_regular0(x))
    h, w = cuntz_splice_once_witness(bg, u + 1)
    end = max(bg.block_vertices(i))
    origin = list(bg.vertex_order)
    origin[end + 1:end + 1] = [None, None]
    trace.record(MoveSpec("C", u + 1), h, w)
    return blocked(h, origin), w


def _fixup(bg: BlockedGraphForm, trace):
    wit = EquivWitness.identity(bg.bullet())
    bh, trace, wit = canonical_fixups(bg, trace, wit)
    rep = canonical_check(bh)
    if not rep.ok:
        raise HypothesisViolated(f"repair left canonical form: conditions {rep.failed()}")
    return bh, wit


def _pad(X: np.ndarray, poset, sizes, r) -> np.ndarray:
    return iota_r(square(poset, sizes, X), r).M


def _swap_tail(sizes, r, i) -> np.ndarray:
    total = sum(sizes) + sum(r)
    P = im.identity(total)
    o = offsets([a + b for a, b in zip(sizes, r)])[i] + sizes[i]
    P[o, o] = P[o + 1, o + 1] = 0
    P[o, o + 1] = P[o + 1, o] = 1
    return P


def gl_to_sl(F1: BlockedGraphForm, F2: BlockedGraphForm, witness: EquivWitness,
             trace1=None, trace2=None) -> Repair:
    """Turn a GL_P witness between canonical forms into an SL_P witness.

    Cyclic blocks with U{i} = -1 and no successors are fixed by the free sign
    flip; noncyclic blocks by two expansions and a swap (det U) or by a
    Cuntz splice (det V).  A -1 elsewhere raises HypothesisViolated."""
    from .moves import MoveTrace

    t1 = trace1 if trace1 is not None else MoveTrace(F1.graph)
    t2 = trace2 if trace2 is not None else MoveTrace(F2.graph)
    B1, B2 = F1.bullet(), F2.bullet()
    if verify_equiv(witness.U, B1, witness.V, B2).verdict == Verdict.NEITHER:
        raise HypothesisViolated("witness does not relate the two forms")
    notes = []
    U, V = witness.U.copy(), witness.V.copy()
    Ub, Vb = square(B1.poset, B1.m, U), square(B1.poset, B1.n, V)
    for i in range(B1.N):
        if B1.n[i] == 1 and im.det(Vb.block(i, i)) != 1:
            raise HypothesisViolated(f"V{{{i + 1}}} must be 1 on a block with n = 1")
        if B1.m[i] == 1 and im.det(Ub.block(i, i)) != 1:
            if _successor_free(B1, i):
                flip = im.identity(U.shape[0])
                o = offsets(B1.m)[i]
                flip[o, o] = -1
                U = im.mul(U, flip)
                notes.append(f"sign flip on successor-free cyclic block {i + 1}")
            else:
                raise HypothesisViolated(
                    f"U{{{i + 1}}} = -1 on a cyclic block with successors")
    w = EquivWitness(U, V, B1, B2)
    g1, g2 = F1, F2
    for i in range(B1.N):
        Ub = square(w.source.poset, w.source.m, w.U)
        if w.source.m[i] > 1 and im.det(Ub.block(i, i)) == -1:
            g1, g2, w = _repair_u(g1, g2, w, i, t1, t2)
            notes.append(f"expansions and swap on block {i + 1}")
    for i in range(B1.N):
        Vb = square(w.source.poset, w.source.n, w.V)
        if w.source.m[i] > 1 and im.det(Vb.block(i, i)) == -1:
            g1, g2, w = _repair_v(g1, g2, w, i, t1, t2)
            notes.append(f"Cuntz splice on block {i + 1}")
    rep = w.check()
    if rep.verdict != Verdict.SLP:
        raise RuntimeError(f"repair did not produce an SL witness: {rep}")
    return Repair(g1, g2, w, t1, t2, notes)


def _repair_u(g1, g2, w, i, t1, t2):
    r = [0] * g1.N
    r[i] = 2
    P, m, n = g1.poset, g1.m_index, g1.n_index
    h1, W1 = _expand_twice(g1, i, t1)
    h2, W2 = _expand_twice(g2, i, t2)
    Sm, Sn = _swap_tail(m, r, i), _swap_tail(n, r, i)
    U2 = im.mul(W2.U, Sm, _pad(w.U, P, m, r), im.inverse_unimodular(W1.U))
    V2 = im.mul(im.inverse_unimodular(W1.V), _pad(w.V, P, n, r), Sn, W2.V)
    return _finish(h1, h2, U2, V2, t1, t2)


def _repair_v(g1, g2, w, i, t1, t2):
    r = [0] * g1.N
    r[i] = 2
    P, m, n = g1.poset, g1.m_index, g1.n_index
    h1, W1 = _splice(g1, i, t1)
    h2, W2 = _expand_twice(g2, i, t2)
    U2 = im.mul(W2.U, _pad(w.U, P, m, r), im.inverse_unimodular(W1.U))
    V2 = im.mul(im.inverse_unimodular(W1.V), _pad(w.V, P, n, r), W2.V)
    return _finish(h1, h2, U2, V2, t1, t2)


def _finish(h1, h2, U2, V2, t1, t2):
    k1, f1 = _fixup(h1, t1)
    k2, f2 = _fixup(h2, t2)
    U = im.mul(f2.U, U2, im.inverse_unimodular(f1.U))
    V = im.mul(im.inverse_unimodular(f1.V), V2, f2.V)
    w = EquivWitness(U, V, k1.bullet(), k2.bullet())
    if w.check().verdict == Verdict.NEITHER:
        raise RuntimeError("repaired witness does not verify")
    return k1, k2, w


# ---------------------------------------------------------------------------
# SL witness to moves


def _allowed_columns(bg: BlockedGraphForm) -> set[int]:
    # a column may be added along any path when its vertex carries a loop
    g = bg.graph
    return {v for v in range(g.n) if g.adj[v][v] != 0}


def slp_to_moves(F1: BlockedGraphForm, F2: BlockedGraphForm, witness: EquivWitness):
    """Row and column additions (and subtractions) turning F1 into F2."""
    from .moves import MoveSpec, MoveTrace, row_col_add

    B1, B2 = F1.bullet(), F2.bullet()
    chain = factor_positive_equivalence(B1, B2, witness.U, witness.V,
                                        allowed_cols=_allowed_columns(F1))
    trace = MoveTrace(F1.graph)
    bg = F1
    for st in chain.steps:
        rr = bg.regular_rows()
        if st.side == "left":
            u, v, side = rr[st.s] + 1, rr[st.t] + 1, "row"
            kind = "RowAdd" if st.c == 1 else "RowSub"
        else:
            u, v, side = st.s + 1, st.t + 1, "col"
            kind = "ColAdd" if st.c == 1 else "ColSub"
        h, w = row_col_add(bg, u, v, side, st.c)
        trace.record(MoveSpec(kind, u, v), h, w)
        bg = blocked(h, bg.vertex_order)
    if bg.graph.digest() != F2.graph.digest():
        raise RuntimeError("replayed moves do not reach the target graph")
    return trace, chain
