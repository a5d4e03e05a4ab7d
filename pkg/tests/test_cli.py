import json

import pytest

from graphmoves.checker import check_certificate
from graphmoves.cli import main


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.fixture
def pair(tmp_path):
    e = write(tmp_path, "E.txt", "3\n1 1 2\n0 2 1\n0 0 1\n")
    f = write(tmp_path, "F.txt", "3\n1 1 0\n0 2 1\n0 0 1\n")
    return e, f


def run(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    out = capsys.readouterr()
    return exc.value.code, out.out, out.err


def test_compare_example_pair(pair, tmp_path, capsys):
    cert = str(tmp_path / "cert.json")
    code, out, _ = run(["compare", *pair, "--cert", cert], capsys)
    assert code == 0
    assert json.loads(out)["verdict"] == "EquivalentStable"
    data = json.loads(open(cert).read())
    assert check_certificate(data["certificate"]) == []


def test_compare_not_equivalent(tmp_path, capsys):
    a = write(tmp_path, "a.txt", "1\n2\n")
    b = write(tmp_path, "b.txt", "1\n3\n")
    code, out, _ = run(["compare", a, b], capsys)
    assert code == 1 and json.loads(out)["verdict"] == "NotEquivalent"


def test_compare_unital(pair, capsys):
    code, out, _ = run(["compare", pair[0], pair[0], "--unital"], capsys)
    assert code == 0 and json.loads(out)["verdict"] == "EquivalentUnital"


def test_info(pair, capsys):
    code, out, _ = run(["info", pair[0]], capsys)
    d = json.loads(out)
    assert code == 0
    assert d["components"]["kinds"] == ["Cyclic", "NoncyclicSCC", "Cyclic"]
    assert d["condition_K"] is False


def test_invariant(pair, capsys):
    code, out, _ = run(["invariant", pair[0]], capsys)
    assert code == 0 and json.loads(out)["K0_full"] == "Z"


def test_move_with_witness(pair, tmp_path, capsys):
    wpath = str(tmp_path / "w.json")
    code, out, _ = run(["move", pair[0], '{"kind": "ColAdd", "u": 2, "v": 3}', "--witness", wpath],
                       capsys)
    assert code == 0
    assert out.splitlines()[1:] == ["1 1 3", "0 2 2", "0 0 1"]
    w = json.loads(open(wpath).read())
    assert w["target"]["entries"] == [[0, 1, 3], [0, 1, 2], [0, 0, 0]]


def test_move_illegal(pair, capsys):
    code, _, err = run(["move", pair[0], '{"kind": "Col", "u": 1}'], capsys)
    assert code == 3 and "loop" in err


def test_canonical(pair, tmp_path, capsys):
    cert = str(tmp_path / "c.json")
    code, out, _ = run(["canonical", pair[0], "--cert", cert], capsys)
    assert code == 0 and out.startswith("5\n")
    data = json.loads(open(cert).read())
    assert data["conditions"]["ok"]
    data.pop("conditions")
    assert check_certificate(data) == []


def test_factorize(tmp_path, capsys):
    b = write(tmp_path, "B.json", json.dumps({"shape": [3, 3],
                                               "entries": [[1, 1, 1], [1, 2, 1], [1, 1, 2]]}))
    u = write(tmp_path, "U.json", json.dumps({"shape": [3, 3],
                                               "entries": [[1, 1, 0], [0, 1, 0], [0, 0, 1]]}))
    code, out, _ = run(["factorize", "--B", b, "--U", u], capsys)
    assert code == 0
    assert json.loads(out)["end"] == [[2, 3, 2], [1, 2, 1], [1, 1, 2]]


def test_phi(capsys):
    code, out, _ = run(["phi", "9"], capsys)
    assert code == 0 and out.strip() == "4"
    code, _, _ = run(["phi", "2"], capsys)
    assert code == 3


def test_input_errors(tmp_path, capsys):
    bad = write(tmp_path, "bad.txt", "2\n1 2\n")
    assert run(["info", bad], capsys)[0] == 3
    assert run(["info", str(tmp_path / "missing.txt")], capsys)[0] == 3
    assert run(["compare", bad], capsys)[0] == 3
    assert run(["frobnicate"], capsys)[0] == 3
