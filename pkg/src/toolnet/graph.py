"""Weighted directed tool graph.

Nodes are tools plus two virtual nodes, ``start`` and ``end``. Edges carry a
prior weight (the weight the graph was built with) and a current weight
(the prior blended with what dynamic updates have learnt). Edges live in
CSR arrays ordered by source index so the update kernels can stream over
them; tools are indexed in id order, followed by ``start`` and ``end``.

A graph is single-writer: queries may run concurrently, mutations
(:meth:`ToolGraph.set_active`, :meth:`ToolGraph.set_weight`, dynamic
updates) need exclusive access.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import (
    DuplicateToolId,
    EmptyToolSet,
    EndHasNoSuccessors,
    MalformedGraph,
    NonPositiveAlpha,
    ReservedToolId,
    UnknownNode,
    ValidationError,
)

START = "start"
END = "end"
RESERVED = frozenset({START, END})

EPSILON_PRUNE = 1e-6
ROW_TOLERANCE = 1e-9
FORMAT_VERSION = 1


def format_weight(w: float) -> str:
    """Canonical decimal string for a weight (12 significant digits)."""
    return format(w, ".12g")


def validate_tool_id(tool_id) -> str:
    if not isinstance(tool_id, str) or not tool_id:
        raise ValidationError(f"tool id must be a non-empty string, got {tool_id!r}")
    if tool_id in RESERVED:
        raise ReservedToolId(f"{tool_id!r} is reserved")
    return tool_id


@dataclass(frozen=True)
class UpdateParams:
    """Hyper-parameters of the dynamic update.

    ``alpha`` scales how fast accumulated scores move the weights; ``beta``
    is the share of the prior kept in every updated weight.
    """

    alpha: float = 0.5
    beta: float = 0.3

    def __post_init__(self):
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha) and self.alpha > 0):
            raise NonPositiveAlpha(f"alpha must be a positive finite number, got {self.alpha!r}")
        if not (isinstance(self.beta, (int, float)) and 0.0 <= self.beta <= 1.0):
            raise ValidationError(f"beta must lie in [0, 1], got {self.beta!r}")


@dataclass
class ToolNode:
    id: str
    description: str = ""
    category: str | None = None
    accumulated_score: int = 0
    active: bool = True


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    prior_weight: float
    current_weight: float


@dataclass(frozen=True)
class RowReport:
    node: str
    out_degree: int
    deviation: float
    flagged: bool


@dataclass
class DegreeReport:
    rows: list[RowReport] = field(default_factory=list)
    tolerance: float = ROW_TOLERANCE

    @property
    def flagged(self) -> list[str]:
        return [r.node for r in self.rows if r.flagged]

    @property
    def ok(self) -> bool:
        return not self.flagged

    @property
    def max_out_degree(self) -> int:
        return max((r.out_degree for r in self.rows if r.node != START), default=0)

    def row(self, node: str) -> RowReport:
        for r in self.rows:
            if r.node == node:
                return r
        raise UnknownNode(node)


def _as_node(tool) -> ToolNode:
    if isinstance(tool, ToolNode):
        return copy.copy(tool)
    if isinstance(tool, str):
        return ToolNode(tool)
    tool = tuple(tool)
    return ToolNode(*tool[:3])


def _weight_value(raw, what: str) -> float:
    try:
        w = float(raw)
    except (TypeError, ValueError):
        raise MalformedGraph(f"{what}: not a number: {raw!r}") from None
    if not math.isfinite(w) or w < 0.0 or w > 1.0:
        raise MalformedGraph(f"{what}: weight {raw!r} outside [0, 1]")
    return w


class ToolGraph:
    """Tool graph with structural axioms enforced at construction.

    Every tool has a self-loop and an edge to ``end``; ``start`` has an edge
    to every tool and none to ``end``; nothing leaves ``end`` and nothing
    enters ``start``.
    """

    def __init__(
        self,
        nodes: Iterable,
        edges: Iterable[tuple[str, str, float, float]],
        params: UpdateParams | None = None,
        iteration: int = 0,
    ):
        self.params = params if params is not None else UpdateParams()
        if not isinstance(iteration, int) or iteration < 0:
            raise ValidationError(f"iteration must be a non-negative integer, got {iteration!r}")
        self.iteration = iteration

        tools: dict[str, ToolNode] = {}
        for raw in nodes:
            node = _as_node(raw)
            validate_tool_id(node.id)
            if node.id in tools:
                raise DuplicateToolId(f"duplicate tool id {node.id!r}")
            tools[node.id] = node
        if not tools:
            raise EmptyToolSet("a graph needs at least one tool")

        self._ids: list[str] = sorted(tools)
        self._nodes = {i: tools[i] for i in self._ids}
        self._order = self._ids + [START, END]
        self._index = {name: k for k, name in enumerate(self._order)}
        n_tools = len(self._ids)
        start_ix, end_ix = n_tools, n_tools + 1

        src, dst, prior, current = [], [], [], []
        for e in edges:
            s, t, p, c = e
            si = self._index.get(s)
            ti = self._index.get(t)
            if si is None or ti is None:
                raise MalformedGraph(f"edge {s!r}->{t!r} references an unknown node")
            if si == end_ix:
                raise MalformedGraph(f"edge {s!r}->{t!r} leaves 'end'")
            if ti == start_ix:
                raise MalformedGraph(f"edge {s!r}->{t!r} enters 'start'")
            if si == start_ix and ti == end_ix:
                raise MalformedGraph("'start' must not connect to 'end'")
            src.append(si)
            dst.append(ti)
            prior.append(_weight_value(p, f"prior weight of {s!r}->{t!r}"))
            current.append(_weight_value(c, f"current weight of {s!r}->{t!r}"))

        n_nodes = n_tools + 2
        src_a = np.asarray(src, dtype=np.int64)
        dst_a = np.asarray(dst, dtype=np.int64)
        keys = src_a * n_nodes + dst_a
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if len(keys) > 1 and np.any(keys[1:] == keys[:-1]):
            k = int(keys[1:][keys[1:] == keys[:-1]][0])
            raise MalformedGraph(f"duplicate edge {self._order[k // n_nodes]!r}->{self._order[k % n_nodes]!r}")

        present = set(keys.tolist())
        for i in range(n_tools):
            for need, label in (
                (i * n_nodes + i, "self-loop"),
                (i * n_nodes + end_ix, "edge to 'end'"),
                (start_ix * n_nodes + i, "edge from 'start'"),
            ):
                if need not in present:
                    raise MalformedGraph(f"tool {self._ids[i]!r} is missing its {label}")

        self._indices = np.ascontiguousarray(dst_a[order])
        self._prior = np.ascontiguousarray(np.asarray(prior, dtype=np.float64)[order])
        self._current = np.ascontiguousarray(np.asarray(current, dtype=np.float64)[order])
        counts = np.bincount(src_a, minlength=n_nodes)
        self._indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=self._indptr[1:])

    # -- basic queries -------------------------------------------------

    @property
    def tool_ids(self) -> list[str]:
        return list(self._ids)

    @property
    def num_tools(self) -> int:
        return len(self._ids)

    @property
    def num_edges(self) -> int:
        return len(self._indices)

    def __contains__(self, node) -> bool:
        return node in self._index

    def __len__(self) -> int:
        return len(self._ids)

    def __repr__(self) -> str:
        return f"ToolGraph(tools={self.num_tools}, edges={self.num_edges}, iteration={self.iteration})"

    def node(self, tool_id: str) -> ToolNode:
        try:
            return self._nodes[tool_id]
        except KeyError:
            raise UnknownNode(f"unknown tool {tool_id!r}") from None

    @property
    def nodes(self) -> list[ToolNode]:
        return [self._nodes[i] for i in self._ids]

    def _ix(self, node: str) -> int:
        try:
            return self._index[node]
        except (KeyError, TypeError):
            raise UnknownNode(f"unknown node {node!r}") from None

    def _edge_pos(self, source: str, target: str) -> int:
        si, ti = self._ix(source), self._ix(target)
        lo, hi = self._indptr[si], self._indptr[si + 1]
        k = lo + int(np.searchsorted(self._indices[lo:hi], ti))
        if k >= hi or self._indices[k] != ti:
            raise KeyError(f"no edge {source!r}->{target!r}")
        return int(k)

    def has_edge(self, source: str, target: str) -> bool:
        try:
            self._edge_pos(source, target)
        except KeyError:
            return False
        return True

    def weight(self, source: str, target: str) -> float:
        return float(self._current[self._edge_pos(source, target)])

    def prior_weight(self, source: str, target: str) -> float:
        return float(self._prior[self._edge_pos(source, target)])

    def out_edges(self, source: str) -> list[Edge]:
        si = self._ix(source)
        lo, hi = self._indptr[si], self._indptr[si + 1]
        return [
            Edge(source, self._order[j], float(p), float(c))
            for j, p, c in zip(self._indices[lo:hi].tolist(), self._prior[lo:hi].tolist(), self._current[lo:hi].tolist())
        ]

    def edges(self) -> list[Edge]:
        """All edges in canonical (source, target) string order."""
        out = []
        for name in self._order[:-1]:
            out.extend(self.out_edges(name))
        out.sort(key=lambda e: (e.source, e.target))
        return out

    def successors(self, source: str, epsilon: float = EPSILON_PRUNE) -> list[tuple[str, float]]:
        """Visible out-neighbours of ``source`` with their current weights.

        Edges at or below ``epsilon`` are hidden, as are inactive tools other
        than ``source`` itself. Sorted by weight descending, then id.
        """
        if source == END:
            raise EndHasNoSuccessors("'end' is a sink")
        si = self._ix(source)
        lo, hi = self._indptr[si], self._indptr[si + 1]
        out = []
        for j, w in zip(self._indices[lo:hi].tolist(), self._current[lo:hi].tolist()):
            if w <= epsilon:
                continue
            name = self._order[j]
            if name != END and name != source and not self._nodes[name].active:
                continue
            out.append((name, w))
        out.sort(key=lambda item: (-item[1], item[0]))
        return out

    # -- mutation ------------------------------------------------------

    def set_active(self, tool_id: str, active: bool) -> ToolGraph:
        self.node(tool_id).active = bool(active)
        return self

    def set_weight(self, source: str, target: str, current: float | None = None, prior: float | None = None) -> ToolGraph:
        """Overwrite one edge's weights in place. No renormalisation."""
        k = self._edge_pos(source, target)
        if current is not None:
            self._current[k] = _weight_value(current, "current weight")
        if prior is not None:
            self._prior[k] = _weight_value(prior, "prior weight")
        return self

    # -- reports -------------------------------------------------------

    def degree_check(self, epsilon: float = EPSILON_PRUNE, tolerance: float = ROW_TOLERANCE) -> DegreeReport:
        report = DegreeReport(tolerance=tolerance)
        for si, name in enumerate(self._order[:-1]):
            row = self._current[self._indptr[si]:self._indptr[si + 1]]
            deviation = abs(math.fsum(row.tolist()) - 1.0)
            report.rows.append(RowReport(name, int(np.count_nonzero(row > epsilon)), deviation, deviation > tolerance))
        return report

    def mean_inbound_weights(self) -> dict[str, float]:
        """Mean current weight into each tool over in-edges from tool nodes.

        ``start`` edges are left out: they are fixed after construction and
        identical across tools, so they only dilute the signal.
        """
        means = kernels.inbound_mean(self._indptr, self._indices, self._current, self.num_tools, len(self._order))
        return {name: float(means[i]) for i, name in enumerate(self._ids)}

    def scores(self) -> dict[str, int]:
        return {i: self._nodes[i].accumulated_score for i in self._ids}

    # -- copying and serialisation --------------------------------------

    def copy(self) -> ToolGraph:
        return copy.deepcopy(self)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "params": {"alpha": self.params.alpha, "beta": self.params.beta},
            "iteration": self.iteration,
            "nodes": [asdict(self._nodes[i]) for i in self._ids],
            "edges": [
                {
                    "from": e.source,
                    "to": e.target,
                    "prior_weight": format_weight(e.prior_weight),
                    "current_weight": format_weight(e.current_weight),
                }
                for e in self.edges()
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ToolGraph:
        if not isinstance(data, dict):
            raise MalformedGraph("graph document must be a JSON object")
        if data.get("format_version") != FORMAT_VERSION:
            raise MalformedGraph(f"unsupported format_version {data.get('format_version')!r}")
        try:
            params = UpdateParams(**data["params"])
            nodes = []
            for n in data["nodes"]:
                score = n.get("accumulated_score", 0)
                if not isinstance(score, int) or isinstance(score, bool):
                    raise MalformedGraph(f"accumulated_score of {n.get('id')!r} must be an integer")
                nodes.append(
                    ToolNode(
                        id=n["id"],
                        description=n.get("description", ""),
                        category=n.get("category"),
                        accumulated_score=score,
                        active=bool(n.get("active", True)),
                    )
                )
            edges = [(e["from"], e["to"], e["prior_weight"], e["current_weight"]) for e in data["edges"]]
            iteration = data.get("iteration", 0)
        except (KeyError, TypeError) as exc:
            raise MalformedGraph(f"malformed graph document: {exc}") from None
        return cls(nodes, edges, params=params, iteration=iteration)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def loads(cls, text: str) -> ToolGraph:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedGraph(f"graph file is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> ToolGraph:
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def new_graph(tools: Sequence, params: UpdateParams | None = None) -> ToolGraph:
    """Non-informative graph: every tool links to every tool and to ``end``.

    Tool rows get ``1/(N+1)`` per edge; ``start`` gets ``1/N`` per tool.
    ``tools`` holds :class:`ToolNode` objects, ids, or
    ``(id, description, category)`` tuples.
    """
    nodes = [_as_node(t) for t in tools]
    if not nodes:
        raise EmptyToolSet("a graph needs at least one tool")
    seen = set()
    for n in nodes:
        validate_tool_id(n.id)
        if n.id in seen:
            raise DuplicateToolId(f"duplicate tool id {n.id!r}")
        seen.add(n.id)
        n.accumulated_score = 0
    ids = [n.id for n in nodes]
    w_tool = 1.0 / (len(ids) + 1)
    w_start = 1.0 / len(ids)
    edges = [(START, t, w_start, w_start) for t in ids]
    for s in ids:
        edges.extend((s, t, w_tool, w_tool) for t in ids)
        edges.append((s, END, w_tool, w_tool))
    return ToolGraph(nodes, edges, params=params)
