"""Command line interface.  Exit codes: 0 success or certificate, 1 not
equivalent, 2 unknown, 3 input error."""

from __future__ import annotations

import json
import sys

import click

from . import intmat as im
from .blocks import BlockMatrix, Poset, block_form, blocked, canonical_check, canonical_form
from .errors import GraphMovesError
from .graph_core import GraphFormatError, classify_vertices, parse_graph, render_graph
from .structure import components, condition_k

EXIT_INPUT = 3


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


def _read_graph(path: str):
    try:
        with open(path) as fh:
            return parse_graph(fh.read())
    except (OSError, GraphFormatError) as e:
        raise InputError(f"cannot read graph {path}: {e}")


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read JSON {path}: {e}")


def _matrix(d) -> "im.np.ndarray":
    try:
        return im.mat(d["entries"], tuple(d["shape"]))
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"bad matrix JSON: {e}")


def _block_matrix(d) -> BlockMatrix:
    M = _matrix(d)
    if "poset" not in d:
        return BlockMatrix(Poset.chain(1), (M.shape[0],), (M.shape[1],), M)
    try:
        return BlockMatrix(Poset(d["poset"]), tuple(d["m"]), tuple(d["n"]), M)
    except (KeyError, ValueError) as e:
        raise InputError(f"bad block matrix JSON: {e}")


def _emit(obj, out: str | None):
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


@click.group()
def cli():
    """Graph moves, invariants and equivalence certificates."""


@cli.command()
@click.argument("graph")
def info(graph):
    """Components, kinds, transition states and Condition (K)."""
    g = _read_graph(graph)
    cp = components(g)
    click.echo(json.dumps({
        "vertices": g.n,
        "vertex_classes": [c.value for c in classify_vertices(g)],
        "components": cp.to_json(),
        "condition_K": condition_k(g),
    }, indent=2))


@cli.command()
@click.argument("graph")
def invariant(graph):
    """Reduced filtered K-theory of the graph's block form."""
    from .kweb import reduced_invariant

    g = _read_graph(graph)
    bg, _ = block_form(g, 3)
    click.echo(json.dumps(reduced_invariant(bg).to_json(), indent=2))


@cli.command()
@click.argument("graph")
@click.argument("move_json")
@click.option("--out", help="write the new graph here instead of stdout")
@click.option("--witness", "witness_out", help="write the equivalence witness here")
def move(graph, move_json, out, witness_out):
    """Apply a move given as JSON, e.g. '{"kind": "ColAdd", "u": 2, "v": 3}'."""
    from .moves import (MoveSpec, apply_move, cuntz_splice_once_witness, edge_expand,
                        row_col_add)

    g = _read_graph(graph)
    try:
        spec = MoveSpec.from_json(json.loads(move_json))
    except (json.JSONDecodeError, KeyError, ValueError) as e:
        raise InputError(f"bad move: {e}")
    try:
        h, wit = apply_move(g, spec), None
        if witness_out:
            bg = blocked(g)
            if spec.kind in ("RowAdd", "RowSub", "ColAdd", "ColSub"):
                side = "row" if spec.kind.startswith("Row") else "col"
                sign = 1 if spec.kind.endswith("Add") else -1
                _, wit = row_col_add(bg, spec.u, spec.v, side, sign)
            elif spec.kind == "EdgeExpand":
                _, wit = edge_expand(bg, spec.u, spec.v)
            elif spec.kind == "C":
                _, wit = cuntz_splice_once_witness(bg, spec.u)
            else:
                raise InputError(f"no witness available for move {spec.kind}")
    except (GraphMovesError, ValueError) as e:
        raise InputError(str(e))
    if out:
        with open(out, "w") as fh:
            fh.write(render_graph(h))
    else:
        click.echo(render_graph(h), nl=False)
    if wit is not None:
        _emit(wit.to_json(), witness_out)


@cli.command()
@click.argument("graph")
@click.option("--out", help="write the canonical graph here")
@click.option("--cert", help="write the certificate (trace and witness) here")
def canonical(graph, out, cert):
    """Canonical form with its move trace and SL witness."""
    from .pipeline import canonical_cert

    g = _read_graph(graph)
    try:
        F, trace, wit = canonical_form(g)
    except (GraphMovesError, ValueError, RuntimeError) as e:
        raise InputError(str(e))
    report = canonical_check(F)
    if out:
        with open(out, "w") as fh:
            fh.write(render_graph(F.graph))
    else:
        click.echo(render_graph(F.graph), nl=False)
    data = canonical_cert(g, F, trace, wit)
    data["conditions"] = report.to_json()
    if cert:
        _emit(data, cert)


@cli.command()
@click.argument("graph1")
@click.argument("graph2")
@click.option("--unital", is_flag=True, help="decide isomorphism instead of stable isomorphism")
@click.option("--budget", default=3, show_default=True, help="entry bound for the search")
@click.option("--seconds", default=60.0, show_default=True, help="wall-clock cap")
@click.option("--moves", is_flag=True, help="also try to produce a move trace")
@click.option("--cert", help="write the verdict with certificate here")
def compare(graph1, graph2, unital, budget, seconds, moves, cert):
    """Semi-decide equivalence; the verdict is printed and sets the exit code."""
    from .pipeline import decide_stable, decide_unital

    g1, g2 = _read_graph(graph1), _read_graph(graph2)
    if unital:
        v = decide_unital(g1, g2, budget, seconds)
    else:
        v = decide_stable(g1, g2, budget, seconds, moves=moves)
    data = v.to_json()
    if cert:
        _emit(data, cert)
    summary = {k: x for k, x in data.items() if k != "certificate"}
    click.echo(json.dumps(summary))
    sys.exit(v.exit_code)


@cli.command()
@click.option("--B", "b_path", required=True, help="source matrix JSON")
@click.option("--B2", "b2_path", help="target matrix JSON (default U B V)")
@click.option("--U", "u_path", required=True, help="left matrix JSON")
@click.option("--V", "v_path", help="right matrix JSON (default identity)")
@click.option("--out", help="write the chain here")
def factorize(b_path, b2_path, u_path, v_path, out):
    """Factor an SL equivalence between positive matrices into basic steps."""
    from .factorize import factor_block_positive, factor_positive_equivalence

    B = _block_matrix(_read_json(b_path))
    U = _matrix(_read_json(u_path))
    V = _matrix(_read_json(v_path)) if v_path else im.identity(B.M.shape[1])
    try:
        B2M = im.mul(U, B.M, V)
        if b2_path:
            B2M = _matrix(_read_json(b2_path))
        if B.N == 1:
            if not im.equal(im.mul(U, B.M, V), B2M):
                raise InputError("U B V differs from B2")
            chain = factor_block_positive(B.M, U, V)
        else:
            chain = factor_positive_equivalence(B, B.with_matrix(B2M), U, V)
    except (GraphMovesError, ValueError) as e:
        raise InputError(str(e))
    _emit(chain.to_json(), out)


@cli.command()
@click.argument("r", type=int)
def phi(r):
    """Smallest even number above the least divisor of r exceeding 2."""
    from .pipeline import phi_lens

    try:
        click.echo(phi_lens(r))
    except ValueError as e:
        raise InputError(str(e))


def main(argv=None):
    """Entry point; usage errors map to the input-error exit code."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(EXIT_INPUT)
    except click.UsageError as e:
        e.show()
        sys.exit(EXIT_INPUT)
    except click.ClickException as e:
        e.show()
        sys.exit(e.exit_code)
    sys.exit(0)


if __name__ == "__main__":
    main()
