"""Exact integer linear algebra on numpy object arrays of Python ints.

Object arrays keep arbitrary precision and carry explicit shapes, so empty
0 x n matrices behave.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Sequence

import numpy as np


def mat(rows, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Integer matrix from nested sequences; ``shape`` is needed for empties."""
    if isinstance(rows, np.ndarray):
        out = np.empty(rows.shape, dtype=object)
        for idx, x in np.ndenumerate(rows):
            out[idx] = int(x)
        if shape is not None and out.shape != shape:
            out = out.reshape(shape)
        return out
    rows = [list(r) for r in rows]
    if shape is None:
        if not rows:
            raise ValueError("shape required for a matrix with no rows")
        shape = (len(rows), len(rows[0]))
    out = np.empty(shape, dtype=object)
    if shape[0] and shape[1]:
        for i, r in enumerate(rows):
            if len(r) != shape[1]:
                raise ValueError("ragged matrix")
            for j, x in enumerate(r):
                out[i, j] = int(x)
    return out


def zeros(m: int, n: int) -> np.ndarray:
    out = np.empty((m, n), dtype=object)
    out.fill(0)
    return out


def identity(n: int) -> np.ndarray:
    out = zeros(n, n)
    for i in range(n):
        out[i, i] = 1
    return out


def elementary(n: int, i: int, j: int, c: int = 1) -> np.ndarray:
    """I + c e_ij (0-based)."""
    out = identity(n)
    out[i, j] += c
    return out


def mul(*ms: np.ndarray) -> np.ndarray:
    out = ms[0]
    for m in ms[1:]:
        if out.shape[1] != m.shape[0]:
            raise ValueError(f"shape mismatch {out.shape} @ {m.shape}")
        if out.shape[1] == 0:
            out = zeros(out.shape[0], m.shape[1])
        else:
            out = out.dot(m)
            if not isinstance(out, np.ndarray):
                out = mat([[out]])
    return out


def to_lists(m: np.ndarray) -> list[list[int]]:
    return [[int(x) for x in row] for row in m]


def equal(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and all(int(x) == int(y) for x, y in zip(a.flat, b.flat))


def det(m: np.ndarray) -> int:
    """Bareiss fraction-free determinant."""
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("determinant of a non-square matrix")
    if n == 0:
        return 1
    a = [[int(x) for x in row] for row in m]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k] != 0:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def inverse_unimodular(m: np.ndarray) -> np.ndarray:
    """Exact inverse of a matrix with determinant +-1."""
    n = m.shape[0]
    a = [[Fraction(int(x)) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(m)]
    for c in range(n):
        p = next((r for r in range(c, n) if a[r][c] != 0), None)
        if p is None:
            raise ValueError("matrix is singular")
        a[c], a[p] = a[p], a[c]
        piv = a[c][c]
        a[c] = [x / piv for x in a[c]]
        for r in range(n):
            if r != c and a[r][c] != 0:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    out = zeros(n, n)
    for i in range(n):
        for j in range(n):
            x = a[i][n + j]
            if x.denominator != 1:
                raise ValueError("matrix is not unimodular")
            out[i, j] = int(x)
    return out


def rank(m: np.ndarray) -> int:
    rows = [[Fraction(int(x)) for x in row] for row in m]
    r = 0
    ncols = m.shape[1]
    for c in range(ncols):
        p = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        for i in range(r + 1, len(rows)):
            if rows[i][c] != 0:
                f = rows[i][c] / rows[r][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[r])]
        r += 1
    return r


@dataclass(frozen=True)
class SNFResult:
    U: np.ndarray
    D: np.ndarray
    V: np.ndarray
    factors: tuple[int, ...]

    @property
    def rank(self) -> int:
        return len(self.factors)


def smith_normal_form(M: np.ndarray) -> SNFResult:
    """U M V = D with d_i | d_{i+1}, d_i > 0.

    Pivot rule: smallest nonzero absolute value in the active submatrix,
    ties broken by row-major position.
    """
    M = mat(M)
    m, n = M.shape
    A = [[int(x) for x in row] for row in M]
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    V = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        for row in V:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, c):
        if c:
            A[dst] = [x + c * y for x, y in zip(A[dst], A[src])]
            U[dst] = [x + c * y for x, y in zip(U[dst], U[src])]

    def add_col(dst, src, c):
        if c:
            for row in A:
                row[dst] += c * row[src]
            for row in V:
                row[dst] += c * row[src]

    factors = []
    t = 0
    while t < min(m, n):
        best = None
        for i in range(t, m):
            for j in range(t, n):
                x = A[i][j]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), i, j)
        if best is None:
            break
        while True:
            _, i, j = best
            if i != t:
                swap_rows(t, i)
            if j != t:
                swap_cols(t, j)
            p = A[t][t]
            for i in range(t + 1, m):
                if A[i][t]:
                    add_row(i, t, -(A[i][t] // p))
            for j in range(t + 1, n):
                if A[t][j]:
                    add_col(j, t, -(A[t][j] // p))
            best = None
            for i in range(t + 1, m):
                x = A[i][t]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), i, t)
            for j in range(t + 1, n):
                x = A[t][j]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), t, j)
            if best is not None:
                continue
            bad = None
            for i in range(t + 1, m):
                for j in range(t + 1, n):
                    if A[i][j] % p:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            add_row(t, bad, 1)
            best = None
            for j in range(t, n):
                x = A[t][j]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), t, j)
        if A[t][t] < 0:
            A[t] = [-x for x in A[t]]
            U[t] = [-x for x in U[t]]
        factors.append(A[t][t])
        t += 1
    return SNFResult(mat(U, (m, m)), mat(A, (m, n)), mat(V, (n, n)), tuple(factors))


def matrix_gcd(M) -> int:
    g = 0
    for x in np.asarray(M, dtype=object).flat:
        g = gcd(g, int(x))
    return g


@dataclass(frozen=True)
class FGAbPresentation:
    """The group Z^m / M Z^n with its SNF coordinates.

    ``generator_change`` maps standard coordinates to SNF coordinates; the
    kept coordinates are those whose diagonal entry is not 1.
    """

    M: np.ndarray
    factors: tuple[int, ...]
    free_rank: int
    generator_change: np.ndarray
    kept: tuple[int, ...]
    moduli: tuple[int, ...]

    @property
    def rows(self) -> int:
        return self.M.shape[0]

    def is_trivial(self) -> bool:
        return not self.kept

    def coords(self, x) -> list[int]:
        """Normal-form coordinates of the class of the vector x."""
        y = mul(self.generator_change, mat([[int(v)] for v in x], (len(x), 1)))
        out = []
        for k, d in zip(self.kept, self.moduli):
            v = int(y[k, 0])
            out.append(v % d if d else v)
        return out

    def signature(self) -> tuple:
        return (self.factors, self.free_rank)

    def __str__(self):
        parts = [f"Z/{d}" for d in self.factors] + ["Z"] * self.free_rank
        return " + ".join(parts) if parts else "0"


def cokernel(M) -> FGAbPresentation:
    M = mat(M) if not isinstance(M, np.ndarray) else M
    res = smith_normal_form(M)
    m = M.shape[0]
    ds = list(res.factors)
    kept, moduli = [], []
    for k in range(m):
        d = ds[k] if k < len(ds) else 0
        if d != 1:
            kept.append(k)
            moduli.append(d)
    torsion = tuple(d for d in ds if d != 1)
    return FGAbPresentation(M, torsion, m - len(ds), res.U, tuple(kept), tuple(moduli))


@dataclass(frozen=True)
class LatticeBasis:
    basis: tuple[tuple[int, ...], ...]
    ambient: int

    @property
    def rank(self) -> int:
        return len(self.basis)

    def as_matrix(self) -> np.ndarray:
        return mat([[b[i] for b in self.basis] for i in range(self.ambient)],
                   (self.ambient, len(self.basis)))


def kernel(M) -> LatticeBasis:
    M = mat(M) if not isinstance(M, np.ndarray) else M
    res = smith_normal_form(M)
    n = M.shape[1]
    r = res.rank
    basis = tuple(tuple(int(res.V[i, k]) for i in range(n)) for k in range(r, n))
    return LatticeBasis(basis, n)


def solve_integer(M, b: Sequence[int]) -> list[int] | None:
    """Some integer x with M x = b, or None when no integer solution exists."""
    M = mat(M) if not isinstance(M, np.ndarray) else M
    m, n = M.shape
    if len(b) != m:
        raise ValueError("right-hand side has the wrong length")
    res = smith_normal_form(M)
    c = mul(res.U, mat([[int(x)] for x in b], (m, 1)))
    y = [0] * n
    for k in range(m):
        ck = int(c[k, 0])
        if k < res.rank:
            d = res.factors[k]
            if ck % d:
                return None
            y[k] = ck // d
        elif ck != 0:
            return None
    x = mul(res.V, mat([[v] for v in y], (n, 1)))
    return [int(v) for v in x[:, 0]]


def in_image(M, b: Sequence[int]) -> bool:
    return solve_integer(M, b) is not None


class ImageContainmentError(ValueError):
    pass


def induced_hom(M, M2, T) -> np.ndarray:
    """Matrix of cok M -> cok M2, [x] -> [T x], in kept SNF coordinates.

    Torsion rows are reduced to residues in [0, d).
    """
    M = mat(M) if not isinstance(M, np.ndarray) else M
    M2 = mat(M2) if not isinstance(M2, np.ndarray) else M2
    T = mat(T) if not isinstance(T, np.ndarray) else T
    if T.shape != (M2.shape[0], M.shape[0]):
        raise ValueError("T has incompatible shape")
    TM = mul(T, M)
    for j in range(TM.shape[1]):
        if not in_image(M2, [int(x) for x in TM[:, j]]):
            raise ImageContainmentError("T does not carry im M into im M2")
    src = cokernel(M)
    dst = cokernel(M2)
    Uinv = inverse_unimodular(src.generator_change)
    out = zeros(len(dst.kept), len(src.kept))
    for c, k in enumerate(src.kept):
        x = [int(v) for v in Uinv[:, k]]
        tx = [int(v) for v in mul(T, mat([[v] for v in x], (len(x), 1)))[:, 0]]
        for r, val in enumerate(dst.coords(tx)):
            out[r, c] = val
    return out


def is_unimodular(m: np.ndarray) -> bool:
    return m.shape[0] == m.shape[1] and abs(det(m)) == 1


def block_diag(*ms: np.ndarray) -> np.ndarray:
    rows = sum(m.shape[0] for m in ms)
    cols = sum(m.shape[1] for m in ms)
    out = zeros(rows, cols)
    r = c = 0
    for m in ms:
        out[r:r + m.shape[0], c:c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out
