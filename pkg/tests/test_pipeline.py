import json

from hypothesis import given, settings, strategies as st
import pytest

from graphmoves import intmat as im
from graphmoves.blocks import BlockMatrix, Poset, block_form
from graphmoves.checker import check_certificate
from graphmoves.errors import HypothesisViolated
from graphmoves.graph_core import Graph
from graphmoves.moves import MoveTrace, apply_move
from graphmoves.pipeline import (EquivalentStable, EquivalentUnital, NotEquivalent, Unknown,
                                 decide_stable, decide_unital, phi_lens, transport_unit,
                                 unit_adjust, unit_condition)
from gen import PAIR_E, PAIR_F, legal_moves
from strategies import graphs

E = Graph.from_rows(PAIR_E)
F = Graph.from_rows(PAIR_F)


def test_example_pair_stable():
    v = decide_stable(E, F)
    assert isinstance(v, EquivalentStable) and v.exit_code == 0
    assert check_certificate(json.dumps(v.certificate)) == []


def test_example_pair_move_trace_refused():
    v = decide_stable(E, F, moves=True)
    assert isinstance(v, EquivalentStable)
    assert "moves" not in v.certificate
    assert v.certificate["moves_note"].startswith("no move trace")
    assert "successors" in v.certificate["moves_note"]


def test_self_comparison_identity():
    v = decide_stable(E, E)
    assert isinstance(v, EquivalentStable)
    lift = v.certificate["lift"]["witness"]
    assert lift["U"] == im.to_lists(im.identity(len(lift["U"])))


def test_self_comparison_with_moves():
    v = decide_stable(E, E, moves=True)
    assert v.certificate["moves"]["trace"]["steps"] == []
    assert check_certificate(v.certificate) == []


def test_cokernels_differ():
    v = decide_stable(Graph.from_rows([[2]]), Graph.from_rows([[3]]))
    assert isinstance(v, NotEquivalent) and v.exit_code == 1
    assert "cokernel" in v.reason


def test_poset_mismatch():
    v = decide_stable(E, Graph.from_rows([[2]]))
    assert isinstance(v, NotEquivalent)


def test_unital_self():
    v = decide_unital(E, E)
    assert isinstance(v, EquivalentUnital)
    assert check_certificate(v.certificate) == []


def test_unital_groups_mismatch():
    assert isinstance(decide_unital(Graph.from_rows([[2]]), Graph.from_rows([[3]])), NotEquivalent)


def test_unit_adjust_identity():
    B = BlockMatrix(Poset.chain(2), (1, 1), (1, 1), im.mat([[0, 1], [0, 0]]))
    assert im.equal(unit_adjust(im.identity(2), B), im.identity(2))


def test_unit_adjust_two_chain():
    B = BlockMatrix(Poset.chain(2), (1, 1), (1, 1), im.mat([[0, 1], [0, 0]]))
    V = im.mat([[1, 2], [0, 1]])
    Vp = unit_adjust(V, B)
    assert im.to_lists(Vp) == [[1, -2], [0, 1]]
    assert im.equal(im.mul(B.M, Vp), B.M)
    assert [int(x) for x in im.mul(im.mul(V, Vp).T, im.mat([[1], [1]])).flat] == [1, 1]


def test_unit_adjust_coverage_gap():
    B = BlockMatrix(Poset.antichain(2), (1, 1), (1, 1), im.mat([[0, 0], [0, 1]]))
    with pytest.raises(HypothesisViolated):
        unit_adjust(im.identity(2), B, None, [1, 2])


def test_unit_condition():
    B = BlockMatrix(Poset.chain(1), (1,), (1,), im.mat([[2]]))
    assert unit_condition(im.identity(1), B, [3], [1]) == [1]
    assert unit_condition(im.identity(1), B, [2], [1]) is None


def test_transport_unit_empty_trace():
    assert transport_unit(MoveTrace(E)) == [1, 1, 1]


def test_phi_examples():
    assert [phi_lens(r) for r in (3, 6, 9, 12)] == [4, 4, 4, 4]
    assert phi_lens(4) == 6 and phi_lens(5) == 6
    with pytest.raises(ValueError):
        phi_lens(2)


def test_verdict_json():
    assert Unknown("x", ["n"]).to_json() == {"verdict": "Unknown", "reason": "x", "notes": ["n"]}
    assert Unknown("x").exit_code == 2


@settings(max_examples=15)
@given(graphs(max_n=4), graphs(max_n=4))
def test_decide_is_symmetric(g1, g2):
    a, b = decide_stable(g1, g2, seconds=5), decide_stable(g2, g1, seconds=5)
    assert a.name == b.name


@settings(max_examples=15)
@given(graphs(max_n=5), st.randoms(use_true_random=False))
def test_legal_move_gives_stable_equivalence(g, r):
    ms = legal_moves(g)
    if not ms:
        return
    h = apply_move(g, r.choice(ms))
    v = decide_stable(g, h, seconds=10)
    assert isinstance(v, EquivalentStable), v
    assert check_certificate(v.certificate) == []


@settings(max_examples=10)
@given(graphs(max_n=4))
def test_decide_is_deterministic(g):
    h, _ = block_form(g, 3)
    a, b = decide_stable(g, h.graph), decide_stable(g, h.graph)
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)
