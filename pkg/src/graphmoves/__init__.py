"""Exact-integer tools for graph moves, block matrix equivalences and the
reduced filtered K-theory of finite graphs."""

from .graph_core import INF, Graph, parse_graph, render_graph

__all__ = ["INF", "Graph", "parse_graph", "render_graph"]
__version__ = "0.1.0"
