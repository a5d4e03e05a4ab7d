import copy
import json

import pytest

from graphmoves import intmat as im
from graphmoves.blocks import blocked, canonical_form
from graphmoves.checker import check_certificate
from graphmoves.graph_core import Graph
from graphmoves.moves import cuntz_splice_twice_witness, move_p_witness
from graphmoves.pipeline import canonical_cert, decide_stable, equivalence_cert
from gen import PAIR_E, PAIR_F, splice_instances

E = Graph.from_rows(PAIR_E)
F = Graph.from_rows(PAIR_F)


@pytest.fixture(scope="module")
def compare_cert():
    return json.loads(json.dumps(decide_stable(E, F).certificate))


@pytest.fixture(scope="module")
def canon_cert():
    bg, trace, wit = canonical_form(E)
    return json.loads(json.dumps(canonical_cert(E, bg, trace, wit)))


def test_accepts_compare(compare_cert):
    assert check_certificate(compare_cert) == []
    assert check_certificate(json.dumps(compare_cert)) == []


def test_accepts_canonical(canon_cert):
    assert check_certificate(canon_cert) == []


def test_rejects_tampered_lift(compare_cert):
    bad = copy.deepcopy(compare_cert)
    bad["lift"]["witness"]["U"][0][0] += 1
    assert check_certificate(bad)


def test_rejects_unpinned_lift(compare_cert):
    bad = copy.deepcopy(compare_cert)
    bad["lift"]["pin_v"] = []
    assert any("pin" in e for e in check_certificate(bad))


def test_rejects_wrong_graph(compare_cert):
    bad = copy.deepcopy(compare_cert)
    bad["g2"] = [[1, 1, 0], [0, 2, 1], [0, 0, 2]]
    assert check_certificate(bad)


def test_rejects_broken_trace(canon_cert):
    bad = copy.deepcopy(canon_cert)
    steps = bad["trace"]["steps"]
    assert steps
    steps[0]["move"]["u"] = 1
    assert check_certificate(bad)


def test_rejects_wrong_canonical(canon_cert):
    bad = copy.deepcopy(canon_cert)
    bad["canonical"][1][1] += 1
    assert check_certificate(bad)


def test_equivalence_with_graphs():
    bg, u = splice_instances(1, seed=4)[0]
    h, w = cuntz_splice_twice_witness(bg, u)
    pad = [a - b for a, b in zip(w.source.n, bg.bullet().n)]
    cert = equivalence_cert(w, "SLP", source_graph=bg.graph, target_graph=h, pad=pad)
    assert check_certificate(json.dumps(cert)) == []
    cert["target_graph"] = [[0] * len(r) for r in cert["target_graph"]]
    assert any("target" in e for e in check_certificate(cert))


def test_equivalence_det_record():
    g = Graph.from_rows([[1, 1], [0, 2]])
    hp, hs, w = move_p_witness(blocked(g), 1)
    good = equivalence_cert(w, "GLP", det_u=[-1, 1], det_v=[1, 1], source_graph=hp, target_graph=hs)
    assert check_certificate(good) == []
    wrong = equivalence_cert(w, "SLP", det_u=[1, 1], det_v=[1, 1])
    errs = check_certificate(wrong)
    assert any("determinant" in e for e in errs) and any("det U" in e for e in errs)


def test_rejects_non_triangular(canon_cert):
    d = {"type": "equivalence", "witness": copy.deepcopy(canon_cert["witness"])}
    d["witness"]["U"][-1][0] = 5
    assert any("outside the order" in e for e in check_certificate(d))


def test_unknown_type_and_malformed():
    assert check_certificate({"type": "nope"}) == ["unknown certificate type 'nope'"]
    errs = check_certificate({"type": "equivalence"})
    assert errs and errs[0].startswith("malformed")


def test_checker_arithmetic_independent():
    from graphmoves.checker import _det, _mul

    M = [[2, 1, 0], [1, 3, 1], [0, 1, 4]]
    assert _det(M) == im.det(im.mat(M))
    assert _mul(M, [[1, 0, 0], [0, 1, 0], [0, 0, 1]]) == M
