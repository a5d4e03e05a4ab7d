from hypothesis import given, settings, strategies as st
import pytest

from graphmoves import intmat as im
from graphmoves.blocks import (BlockMatrix, EquivWitness, Poset, Verdict, blocked,
                               canonical_form, mplus_check)
from graphmoves.errors import HypothesisViolated
from graphmoves.factorize import (PositiveChain, _member, _repair_u, basic_entry,
                                  factor_block_positive, factor_positive_equivalence,
                                  factor_row_positive, gl_to_sl, positive, slp_to_moves,
                                  three_cycle_factors, zero_row_free_factorization)
from graphmoves.graph_core import Graph
from graphmoves.moves import MoveTrace
from gen import PAIR_E, row_positive_instances, two_block_instances

B3 = [[1, 1, 1], [1, 2, 1], [1, 1, 2]]


@pytest.fixture(scope="module")
def pair_canonical():
    F, _, _ = canonical_form(Graph.from_rows(PAIR_E))
    return F


def swapped(F, side):
    """Canonical form with two middle rows (or columns) of its matrix swapped."""
    B = F.bullet()
    P = im.identity(5)
    P[[1, 2]] = P[[2, 1]]
    M = im.mul(P, B.M) if side == "row" else im.mul(B.M, P)
    G = blocked(Graph.from_rows(im.to_lists(M + im.identity(5))))
    U, V = (P, im.identity(5)) if side == "row" else (im.identity(5), P)
    return G, EquivWitness(U, V, B, G.bullet())


def test_three_cycle_product():
    C = three_cycle_factors()
    assert im.to_lists(im.mul(*C)) == [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
    for k in range(6):
        S = im.mul(*C[k:])
        assert all(x >= 0 for x in S.flat)
        assert all(any(x != 0 for x in row) for row in im.to_lists(S))
    assert all(basic_entry(c) is not None for c in C)


def test_basic_entry():
    assert basic_entry(im.elementary(3, 0, 2, -1)) == (0, 2, -1)
    assert basic_entry(im.elementary(3, 0, 2, 2)) is None
    assert basic_entry(im.identity(3)) is None


def test_row_positive_identity_is_empty():
    ch = factor_row_positive(B3, im.identity(3))
    assert len(ch) == 0 and ch.check(positive)


def test_row_positive_single_addition():
    U = im.elementary(3, 0, 1, 1)
    ch = factor_row_positive(B3, U)
    assert ch.check(positive)
    assert im.equal(ch.end, im.mul(U, im.mat(B3)))


def test_row_positive_rejects_rank_one():
    with pytest.raises(HypothesisViolated):
        factor_row_positive([[1, 1, 1]] * 3, im.elementary(3, 0, 1, 1))


def test_zero_row_free_factorization():
    B = im.mat(B3)
    U = im.mul(im.elementary(3, 0, 1, -1), im.elementary(3, 2, 0, 1))
    steps = zero_row_free_factorization(B, U)
    M = B
    P = im.identity(3)
    for s, t, c in steps:
        E = im.elementary(3, s, t, c)
        M = im.mul(E, M)
        P = im.mul(E, P)
        assert all(any(x != 0 for x in row) for row in im.to_lists(M))
    assert im.equal(P, U)


def test_row_positive_random():
    for B, U in row_positive_instances(15, seed=4):
        ch = factor_row_positive(B, U)
        assert ch.check(positive)
        assert im.equal(ch.recompose()[0], U)


def test_block_positive_two_sided():
    B = im.mat(B3)
    U = im.elementary(3, 1, 2, 1)
    V = im.elementary(3, 0, 2, 1)
    ch = factor_block_positive(B, U, V)
    assert ch.check(positive)
    U2, V2 = ch.recompose()
    assert im.equal(im.mul(U2, B, V2), im.mul(U, B, V))


def test_block_positive_negative_identity():
    B = im.mat([[2, 1, 1, 1], [1, 2, 1, 1], [1, 1, 2, 1], [1, 1, 1, 3]])
    ch = factor_block_positive(B, -im.identity(4), -im.identity(4))
    assert ch.check(positive)
    assert im.equal(ch.end, B)


def test_positive_equivalence_identity_is_empty():
    for B, _, _, _ in two_block_instances(2, seed=1):
        ch = factor_positive_equivalence(B, B, im.identity(6), im.identity(6))
        assert len(ch) == 0


def test_positive_equivalence_two_block():
    for B, B2, U, V in two_block_instances(6, seed=8):
        ch = factor_positive_equivalence(B, B2, U, V)
        assert ch.check(_member(B))
        assert set(ch.groupings) == {"diagonal", "remainder"}


def test_positive_equivalence_off_diagonal_only():
    for B, _, _, _ in two_block_instances(3, seed=9):
        U = im.identity(6)
        U[0, 4] = 1
        B2 = B.with_matrix(im.mul(U, B.M))
        ch = factor_positive_equivalence(B, B2, U, im.identity(6))
        assert ch.check(_member(B))
        assert all(st.c == 1 for st in ch.steps)


def test_positive_equivalence_rejects_gl():
    B, _, _, _ = two_block_instances(1, seed=2)[0]
    U = im.identity(6)
    U[[0, 1]] = U[[1, 0]]
    with pytest.raises(HypothesisViolated):
        factor_positive_equivalence(B, B.with_matrix(im.mul(U, B.M)), U, im.identity(6))


def test_chain_json_round_trip():
    B, B2, U, V = two_block_instances(1, seed=3)[0]
    ch = factor_positive_equivalence(B, B2, U, V)
    back = PositiveChain.from_json(ch.to_json())
    assert back.check(_member(B))
    assert len(back) == len(ch)


def test_gl_to_sl_identity_repair(pair_canonical):
    F = pair_canonical
    rep = gl_to_sl(F, F, EquivWitness.identity(F.bullet()))
    assert rep.notes == []
    assert rep.witness.check().verdict is Verdict.SLP
    assert rep.F1.graph == F.graph


def test_expansion_swap_flips_both_dets(pair_canonical):
    F = pair_canonical
    G, w = swapped(F, "row")
    assert w.check().row_dets == (1, -1, 1)
    _, _, w2 = _repair_u(F, G, w, 1, MoveTrace(F.graph), MoveTrace(G.graph))
    rep = w2.check()
    assert rep.row_dets == (1, 1, 1) and rep.col_dets == (1, -1, 1)


def test_gl_to_sl_row_swap(pair_canonical):
    F = pair_canonical
    G, w = swapped(F, "row")
    rep = gl_to_sl(F, G, w)
    assert rep.notes == ["expansions and swap on block 2", "Cuntz splice on block 2"]
    assert rep.witness.check().verdict is Verdict.SLP
    assert rep.trace1.replay() == rep.F1.graph
    assert rep.trace2.replay() == rep.F2.graph


def test_gl_to_sl_column_swap_uses_splice(pair_canonical):
    F = pair_canonical
    G, w = swapped(F, "col")
    rep = gl_to_sl(F, G, w)
    assert rep.notes == ["Cuntz splice on block 2"]
    assert rep.witness.check().verdict is Verdict.SLP


def test_gl_to_sl_rejects_unrelated_witness(pair_canonical):
    F = pair_canonical
    B = F.bullet()
    U = im.identity(5)
    U[0, 0] = -1
    w = EquivWitness(U, im.identity(5), B, B.with_matrix(im.mul(U, B.M)))
    with pytest.raises(HypothesisViolated):
        gl_to_sl(F, F, w)


def test_slp_to_moves_identity(pair_canonical):
    F = pair_canonical
    trace, chain = slp_to_moves(F, F, EquivWitness.identity(F.bullet()))
    assert trace.steps == [] and len(chain) == 0


def test_slp_to_moves_after_repair(pair_canonical):
    F = pair_canonical
    G, w = swapped(F, "col")
    rep = gl_to_sl(F, G, w)
    trace, _ = slp_to_moves(rep.F1, rep.F2, rep.witness)
    assert trace.replay() == rep.F2.graph
    assert {s.move.kind for s in trace.steps} <= {"RowAdd", "RowSub", "ColAdd", "ColSub"}


@settings(max_examples=30)
@given(st.integers(0, 10 ** 6))
def test_row_positive_property(seed):
    B, U = row_positive_instances(1, seed=seed)[0]
    ch = factor_row_positive(B, U)
    assert ch.check(positive)
    for st_ in ch.steps:
        assert all(x > 0 for x in st_.snapshot.flat)


def test_mplus_membership_of_generated():
    for B, B2, _, _ in two_block_instances(3, seed=5, sizes=(1, 3)):
        assert mplus_check(B) and mplus_check(B2)
        assert isinstance(B, BlockMatrix) and B.poset == Poset.chain(2)
