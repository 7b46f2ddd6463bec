"""Graphviz DOT rendering of a tool graph.

    toolnet export-dot --graph g.json | dot -Tpng -o g.png
"""
from __future__ import annotations

from .graph import END, START, ToolGraph
from .navigation import WeightFormat, render_weight


def _quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: ToolGraph, min_weight: float = 0.0) -> str:
    """Deterministic DOT text; edges lighter than ``min_weight`` are dropped.

    Only nodes touching a kept edge are declared, so a threshold above every
    weight yields an empty digraph.
    """
    edges = [e for e in g.edges() if e.current_weight >= min_weight]
    used = set()
    for e in edges:
        used.add(e.source)
        used.add(e.target)

    lines = ["digraph toolnet {", "  rankdir=LR;"]
    if START in used:
        lines.append(f"  {_quote(START)} [label={_quote(START)}, shape=Mdiamond];")
    for node in g.nodes:
        if node.id in used:
            label = f"{node.id} (s={node.accumulated_score})"
            style = "" if node.active else ", style=dashed"
            lines.append(f"  {_quote(node.id)} [label={_quote(label)}, shape=box{style}];")
    if END in used:
        lines.append(f"  {_quote(END)} [label={_quote(END)}, shape=Msquare];")
    for e in edges:
        w = render_weight(e.current_weight, WeightFormat.TIMES10)
        lines.append(f"  {_quote(e.source)} -> {_quote(e.target)} [label={_quote(w)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
