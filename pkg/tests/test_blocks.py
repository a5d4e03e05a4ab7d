import random

from hypothesis import given, settings, strategies as st
import pytest

from graphmoves import intmat as im
from graphmoves.blocks import (BlockMatrix, EquivWitness, Poset, Verdict, block_form, blocked,
                               canonical_check, canonical_form, iota_r, mplus_check, neg_iota,
                               square, standard_pair, verify_equiv)
from graphmoves.errors import PosetMismatch
from graphmoves.graph_core import Graph, parse_graph
from graphmoves.moves import apply_move
from gen import PAIR_E, PAIR_F
from strategies import graphs

E = Graph.from_rows(PAIR_E)
F = Graph.from_rows(PAIR_F)


def one_block(rows):
    M = im.mat(rows)
    return BlockMatrix(Poset.chain(1), (M.shape[0],), (M.shape[1],), M)


def test_block_form_example_pair_is_identity():
    bg, trace = block_form(E, 3)
    assert bg.graph == E and trace.steps == []


def test_block_form_removes_source():
    bg, trace = block_form(parse_graph("2\n0 1\n0 1"), 3)
    assert bg.graph.to_lists() == [[1]]
    assert [s.move.kind for s in trace.steps] == ["S"]
    assert trace.replay() == bg.graph


def test_block_form_collapses_two_cycle():
    bg, trace = block_form(Graph.from_rows([[0, 1], [1, 0]]), 3)
    assert bg.graph.to_lists() == [[1]]
    assert [s.move.kind for s in trace.steps] == ["Col"]


def test_iota_examples():
    B = one_block([[1]])
    assert iota_r(B, (0,)) == B
    assert im.to_lists(iota_r(B, (2,)).M) == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    assert im.to_lists(neg_iota(B, (4,)).M) == [
        [1, 0, 0, 0, 0], [0, -1, 0, 0, 0], [0, 0, -1, 0, 0], [0, 0, 0, -1, 0], [0, 0, 0, 0, -1]]


def test_verify_equiv_examples():
    B = one_block([[0, 1], [1, 2]])
    assert verify_equiv(im.identity(2), B, im.identity(2), B).verdict is Verdict.SLP
    Z = one_block([[0]])
    rep = verify_equiv(im.mat([[-1]]), Z, im.mat([[1]]), Z)
    assert rep.verdict is Verdict.GLP and rep.row_dets == (-1,)


def test_verify_equiv_rejects_lower_block():
    P = Poset.chain(2)
    B = BlockMatrix(P, (1, 1), (1, 1), im.mat([[1, 1], [0, 1]]))
    U = im.mat([[1, 0], [1, 1]])
    assert verify_equiv(U, B, im.identity(2), B.with_matrix(im.mul(U, B.M))).verdict is Verdict.NEITHER


def test_verify_equiv_dimension_mismatch():
    with pytest.raises(ValueError):
        verify_equiv(im.identity(1), one_block([[1]]), im.identity(1), one_block([[1, 2]]))


def test_example_pair_fails_condition_three():
    assert canonical_check(blocked(E)).failed() == [3]


def test_canonical_form_example_pair():
    bg, trace, wit = canonical_form(E)
    assert canonical_check(bg).ok
    assert bg.m_index == (1, 3, 1)
    mid = bg.bullet().block(1, 1)
    assert all(x > 0 for x in mid.flat)
    assert im.smith_normal_form(mid).factors.count(1) >= 2
    assert trace.replay() == bg.graph
    assert wit.check().verdict is Verdict.SLP


def test_canonical_form_idempotent():
    bg, _, _ = canonical_form(E)
    again, trace, wit = canonical_form(bg.graph)
    assert again.graph == bg.graph
    assert trace.steps == []
    assert im.equal(wit.U, im.identity(wit.U.shape[0]))
    assert im.equal(wit.V, im.identity(wit.V.shape[0]))


def test_standard_pair_example_pair():
    sp = standard_pair(E, F)
    assert sp.F1.m_index == sp.F2.m_index == sp.F1.n_index == sp.F2.n_index
    m = sp.F1.m_index
    assert m[0] == 1 and m[2] == 1 and m[1] >= 3
    assert sp.witness1.check().verdict is Verdict.SLP
    assert sp.witness2.check().verdict is Verdict.SLP


def test_standard_pair_self():
    sp = standard_pair(E, E)
    assert sp.F1.graph == sp.F2.graph


def test_standard_pair_mismatch():
    with pytest.raises(PosetMismatch):
        standard_pair(E, parse_graph("1\n2"))


def test_mplus_example_pair_canonical():
    bg, _, _ = canonical_form(E)
    assert mplus_check(bg.bullet())
    assert not mplus_check(blocked(E).bullet())


def _random_block_matrix(r: random.Random, P: Poset, m, n):
    B = BlockMatrix(P, m, n, im.zeros(sum(m), sum(n)))
    M = B.M.copy()
    for i in range(P.size):
        for j in range(P.size):
            if P.le(i, j):
                for a in B.rows_of(i):
                    for b in B.cols_of(j):
                        M[a, b] = r.randint(-3, 3)
    return B.with_matrix(M)


@given(st.randoms(use_true_random=False))
def test_iota_is_multiplicative(r):
    P = Poset([[1, 1, 1], [0, 1, 0], [0, 0, 1]])
    a = tuple(r.randint(0, 2) for _ in range(3))
    b = tuple(r.randint(0, 2) for _ in range(3))
    c = tuple(r.randint(0, 2) for _ in range(3))
    pad = tuple(r.randint(0, 2) for _ in range(3))
    X = _random_block_matrix(r, P, a, b)
    Y = _random_block_matrix(r, P, b, c)
    XY = BlockMatrix(P, a, c, im.mul(X.M, Y.M))
    lhs = iota_r(XY, pad).M
    rhs = im.mul(iota_r(X, pad).M, iota_r(Y, pad).M)
    assert im.equal(lhs, rhs)
    assert iota_r(iota_r(X, pad), pad) == iota_r(X, tuple(2 * k for k in pad))


@given(st.randoms(use_true_random=False))
def test_witness_composition(r):
    P = Poset.chain(2)
    B = _random_block_matrix(r, P, (2, 1), (2, 1))
    U = square(P, (2, 1), im.mul(im.elementary(3, 0, 2, r.randint(-2, 2)),
                                 im.elementary(3, 1, 0, r.randint(-2, 2)))).M
    w1 = EquivWitness(U, im.identity(3), B, B.with_matrix(im.mul(U, B.M)))
    pad = (1, 0)
    src = neg_iota(w1.target, pad)
    V = im.elementary(4, 2, 1, r.randint(-2, 2))
    w2 = EquivWitness(im.identity(4), V, src, src.with_matrix(im.mul(src.M, V)))
    w = w1.then(w2, pad)
    assert w.check().verdict is Verdict.SLP
    assert w.inverse().check().verdict is Verdict.SLP


@settings(max_examples=25)
@given(graphs(max_n=5))
def test_canonical_form_properties(g):
    bg, trace, wit = canonical_form(g)
    assert canonical_check(bg).ok
    assert trace.replay() == bg.graph
    assert wit.check().verdict is Verdict.SLP
    B = bg.bullet()
    for u in range(B.N):
        for v in range(B.N):
            if B.poset.lt(u, v) and B.m[u] and B.n[v]:
                assert all(x > 0 for x in B.block(u, v).flat)


@settings(max_examples=40)
@given(graphs(max_n=6))
def test_block_form_trace_replays(g):
    bg, trace = block_form(g, 3)
    assert trace.replay() == bg.graph
    h = g
    for st in trace.steps:
        assert h.digest() == st.pre
        h = apply_move(h, st.move)
        assert h.digest() == st.post
