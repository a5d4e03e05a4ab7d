import random

from hypothesis import given, settings
import pytest

from graphmoves import intmat as im
from graphmoves.blocks import Verdict, block_form, blocked
from graphmoves.errors import IllegalAddition, IneligibleMove
from graphmoves.graph_core import INF, Graph, reachability
from graphmoves.moves import (MoveSpec, MoveTrace, apply_move, cuntz_splice, cuntz_splice_multi,
                              cuntz_splice_once_witness, cuntz_splice_twice_witness, edge_expand,
                              move_p, move_p_witness, normalize_for_p, pulelehua_twice_witness,
                              row_col_add)
from graphmoves.structure import components, moveP_eligible
from gen import PAIR_E, PAIR_F, hash_instances, legal_moves, splice_instances
from strategies import graphs

E = Graph.from_rows(PAIR_E)
F = Graph.from_rows(PAIR_F)


def test_collapse_path_middle():
    g = Graph.from_rows([[0, 1, 0], [0, 0, 1], [0, 0, 0]])
    assert apply_move(g, MoveSpec("Col", 2)).to_lists() == [[0, 1], [0, 0]]


def test_source_removal():
    g = Graph.from_rows([[0, 1], [0, 1]])
    assert apply_move(g, MoveSpec("S", 1)).to_lists() == [[1]]


def test_outsplit_two_loops():
    h = apply_move(Graph.from_rows([[2]]), MoveSpec("O", 1, partition=((1,), (1,))))
    assert h.to_lists() == [[1, 1], [1, 1]]


def test_outsplit_rejects_two_infinite_classes():
    g = Graph.from_rows([[0, INF], [0, 1]])
    with pytest.raises(IneligibleMove):
        apply_move(g, MoveSpec("O", 1, partition=((0, INF), (0, INF))))


def test_reduction():
    g = Graph.from_rows([[1, 1, 0], [0, 0, 1], [0, 0, 1]])
    assert apply_move(g, MoveSpec("R", 2)).to_lists() == [[1, 1], [0, 1]]


def test_insplit_counts():
    g = Graph.from_rows([[1, 2], [1, 1]])
    h = apply_move(g, MoveSpec("I", 2, partition=((0, 1), (2, 0))))
    # copy 1 receives the loop, copy 2 the two edges from vertex 1; both
    # copies keep all out-edges of vertex 2
    assert h.to_lists() == [[1, 0, 2], [1, 1, 0], [1, 1, 0]]


def test_move_spec_json_round_trip():
    m = MoveSpec("O", 3, partition=((0, 0, INF), (1, 0, 0)))
    assert MoveSpec.from_json(m.to_json()) == m
    with pytest.raises(ValueError):
        MoveSpec("Z", 1)


def test_cuntz_splice_one_vertex():
    assert cuntz_splice(Graph.from_rows([[2]]), 1).to_lists() == [[2, 1, 0], [1, 1, 1], [0, 1, 1]]


def test_cuntz_splice_multi_adds_two_per_vertex():
    g = Graph.from_rows([[2, 1], [1, 2]])
    assert cuntz_splice_multi(g, {1, 2}).n == 6


def test_cuntz_splice_example_pair_middle():
    h = cuntz_splice(E, 2)
    assert h.to_lists() == [[1, 1, 0, 0, 2], [0, 2, 1, 0, 1], [0, 1, 1, 1, 0],
                            [0, 0, 1, 1, 0], [0, 0, 0, 0, 1]]


def test_double_splice_displayed_blocks():
    h, w = cuntz_splice_twice_witness(blocked(Graph.from_rows([[2]])), 1)
    assert im.to_lists(w.target.M) == [[1, 1, 0, 0, 0], [1, 0, 1, 1, 0], [0, 1, 0, 0, 0],
                                       [0, 1, 0, 0, 1], [0, 0, 0, 1, 0]]
    assert im.to_lists(w.U[1:, 1:]) == [[1, 0, 0, 1], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
    assert w.check().verdict is Verdict.SLP


def test_single_splice_determinant_law():
    for bg, u in splice_instances(15, seed=3):
        _, w = cuntz_splice_once_witness(bg, u)
        rep = w.check()
        j = bg.block_of[u - 1]
        assert rep.verdict is Verdict.GLP
        assert rep.col_dets[j] == -1
        assert all(d == 1 for k, d in enumerate(rep.col_dets) if k != j)
        assert all(d == 1 for d in rep.row_dets)


def test_move_p_small():
    h = move_p(Graph.from_rows([[1, 1], [0, 2]]), 1)
    assert h.to_lists() == [[1, 1, 0, 2], [0, 2, 1, 0], [0, 1, 1, 1], [0, 0, 1, 1]]


def test_move_p_example_pair_f():
    h = move_p(F, 1)
    assert h.to_lists() == [[1, 1, 0, 2, 0], [0, 2, 1, 0, 1], [0, 1, 1, 1, 0],
                            [0, 0, 1, 1, 0], [0, 0, 0, 0, 1]]


def test_move_p_witness_dets():
    g = Graph.from_rows([[1, 1], [0, 2]])
    _, _, w = move_p_witness(blocked(g), 1)
    rep = w.check()
    assert rep.verdict is Verdict.GLP
    assert rep.row_dets == (-1, 1) and rep.col_dets == (1, 1)


def test_move_p_ineligible():
    with pytest.raises(IneligibleMove):
        move_p(Graph.from_rows([[1, 1], [0, 1]]), 1)


def test_move_p_doubles_edges():
    from graphmoves.moves import _move_p

    for g, u in hash_instances(10, seed=5):
        h, mapping, new = _move_p(g, u - 1)
        uu = mapping[u - 1]
        for w in moveP_eligible(g, u).targets:
            v2 = new[w - 1][1]
            assert h.adj[uu][v2] == 2 * g.adj[u - 1][w - 1]
        assert h == move_p(g, u)


def test_pulelehua_witness_is_sl():
    for g, u in hash_instances(10, seed=7):
        _, w = pulelehua_twice_witness(blocked(g), u)
        assert w.check().verdict is Verdict.SLP


def test_col_add_example_pair():
    h, w = row_col_add(blocked(E), 2, 3, "col")
    assert h.to_lists() == [[1, 1, 3], [0, 2, 2], [0, 0, 1]]
    assert im.to_lists(w.target.M) == [[0, 1, 3], [0, 1, 2], [0, 0, 0]]
    assert w.check().verdict is Verdict.SLP


def test_row_add_into_sink_is_illegal():
    g = Graph.from_rows([[1, 1], [0, 0]])
    with pytest.raises(IllegalAddition, match="regular"):
        apply_move(g, MoveSpec("RowAdd", 1, 2))


def test_edge_expand_loop():
    h, w = edge_expand(blocked(Graph.from_rows([[1]])), 1, 1)
    assert h.to_lists() == [[0, 1], [1, 0]]
    assert w.check().verdict is Verdict.SLP


def test_normalize_for_p_identity():
    g = Graph.from_rows([[1, 1], [0, 2]])
    h, u, trace = normalize_for_p(g, 1)
    assert h == g and u == 1 and trace.steps == []


def test_normalize_for_p_removes_source():
    g = Graph.from_rows([[0, 1, 0], [0, 1, 1], [0, 0, 2]])
    h, u, trace = normalize_for_p(g, 2)
    assert h.to_lists() == [[1, 1], [0, 2]] and u == 1
    assert trace.replay() == h


def test_normalize_for_p_outsplits_infinite_emitter():
    g = Graph.from_rows([[1, 1, 0, 0], [0, 2, 0, 0], [0, 0, INF, 1], [0, 0, 0, 0]])
    h, u, trace = normalize_for_p(g, 1)
    assert trace.steps[0].move.kind == "O"
    assert trace.steps[0].move.partition == ((0, 0, 0, 1), (0, 0, INF, 0))
    assert trace.replay() == h


def test_trace_json_replay():
    t = MoveTrace(E)
    t.push(MoveSpec("ColAdd", 2, 3))
    t.push(MoveSpec("C", 2))
    d = t.to_json()
    assert [s["move"]["kind"] for s in d["steps"]] == ["ColAdd", "C"]
    assert t.replay() == apply_move(apply_move(E, MoveSpec("ColAdd", 2, 3)), MoveSpec("C", 2))


@settings(max_examples=40)
@given(graphs(max_n=6))
def test_col_add_preserves_reachability(g):
    for m in legal_moves(g, ("ColAdd",)):
        h = apply_move(g, m)
        assert reachability(h) == reachability(g)


@settings(max_examples=40)
@given(graphs(max_n=5))
def test_witnessed_additions_replay(g):
    bg, _ = block_form(g, 3)
    h = bg.graph
    for m in legal_moves(h, ("RowAdd", "ColAdd"))[:4]:
        side = "row" if m.kind == "RowAdd" else "col"
        try:
            h2, w = row_col_add(blocked(h), m.u, m.v, side)
        except IllegalAddition:
            assert components(apply_move(h, m)) != components(h)
            continue
        assert h2 == apply_move(h, m)
        assert w.check().verdict is Verdict.SLP


def test_random_splice_witnesses_replay():
    for bg, u in splice_instances(10, seed=11):
        h, w = cuntz_splice_twice_witness(bg, u)
        once = apply_move(bg.graph, MoveSpec("C", u))
        assert h.n == bg.graph.n + 4 and once.n == bg.graph.n + 2
        assert w.check().verdict is Verdict.SLP
