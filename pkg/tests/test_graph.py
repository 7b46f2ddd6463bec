import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toolnet.construction import Step, Trajectory, static_construct
from toolnet.errors import (
    DuplicateToolId,
    EmptyToolSet,
    EndHasNoSuccessors,
    MalformedGraph,
    NonPositiveAlpha,
    ReservedToolId,
    UnknownNode,
    ValidationError,
)
from toolnet.graph import END, START, ToolGraph, ToolNode, UpdateParams, new_graph


def corpus(*seqs, outcome="success"):
    return [Trajectory(f"t{i}", "", [Step(t) for t in seq], outcome) for i, seq in enumerate(seqs)]


def assert_axioms(g):
    for t in g.tool_ids:
        assert g.has_edge(t, t)
        assert g.has_edge(START, t)
        assert g.has_edge(t, END)
    assert not g.has_edge(START, END)
    for e in g.edges():
        assert e.source != END
        assert e.target != START


class TestNewGraph:
    def test_single_tool(self):
        g = new_graph(["A"])
        assert g.weight(START, "A") == 1.0
        assert g.weight("A", "A") == 0.5
        assert g.weight("A", END) == 0.5
        assert g.num_edges == 3

    def test_three_tools_uniform_rows(self):
        g = new_graph([("A", "a"), ("B", "b"), ("C", "c")])
        assert [(e.target, e.current_weight) for e in g.out_edges("A")] == [
            ("A", 0.25),
            ("B", 0.25),
            ("C", 0.25),
            (END, 0.25),
        ]
        assert g.iteration == 0
        assert all(n.accumulated_score == 0 for n in g.nodes)
        assert_axioms(g)

    def test_prior_equals_current(self):
        g = new_graph(["A", "B"])
        assert all(e.prior_weight == e.current_weight for e in g.edges())

    def test_duplicate(self):
        with pytest.raises(DuplicateToolId):
            new_graph(["A", "A"])

    @pytest.mark.parametrize("name", [START, END])
    def test_reserved(self, name):
        with pytest.raises(ReservedToolId):
            new_graph(["A", name])

    def test_reserved_is_case_sensitive(self):
        g = new_graph(["Start", "END"])
        assert g.tool_ids == ["END", "Start"]

    def test_empty(self):
        with pytest.raises(EmptyToolSet):
            new_graph([])

    def test_input_nodes_not_aliased(self):
        node = ToolNode("A", "desc")
        g = new_graph([node])
        g.set_active("A", False)
        assert node.active


class TestUpdateParams:
    def test_defaults(self):
        p = UpdateParams()
        assert (p.alpha, p.beta) == (0.5, 0.3)

    @pytest.mark.parametrize("alpha", [0, -1, float("nan"), float("inf")])
    def test_bad_alpha(self, alpha):
        with pytest.raises(NonPositiveAlpha):
            UpdateParams(alpha=alpha)

    @pytest.mark.parametrize("beta", [-0.1, 1.01])
    def test_bad_beta(self, beta):
        with pytest.raises(ValidationError):
            UpdateParams(beta=beta)


class TestSuccessors:
    def test_uniform_tie_order(self):
        g = new_graph(["C", "A", "B"])
        assert g.successors("A") == [("A", 0.25), ("B", 0.25), ("C", 0.25), (END, 0.25)]

    def test_after_static_construction(self):
        g = static_construct(["A", "B", "C"], corpus(["A", "B"], ["A", "B"], ["A", "C"]))
        succ = g.successors("A")
        assert [t for t, _ in succ] == ["B", "C"]
        assert succ[0][1] == pytest.approx(2 / 3, abs=1e-4)
        assert succ[1][1] == pytest.approx(1 / 3, abs=1e-4)

    def test_end_is_a_sink(self):
        with pytest.raises(EndHasNoSuccessors):
            new_graph(["A"]).successors(END)

    def test_unknown(self):
        with pytest.raises(UnknownNode):
            new_graph(["A"]).successors("Z")

    def test_start(self):
        g = new_graph(["B", "A"])
        assert g.successors(START) == [("A", 0.5), ("B", 0.5)]

    def test_sorted_by_weight_then_id(self):
        g = new_graph(["A", "B", "C"])
        g.set_weight("A", "C", current=0.4).set_weight("A", "B", current=0.1)
        assert [t for t, _ in g.successors("A")] == ["C", "A", END, "B"]

    def test_repeatable(self):
        g = static_construct(["A", "B", "C"], corpus(["A", "B", "C"], ["B", "A"]))
        assert json.dumps(g.successors("B")) == json.dumps(g.successors("B"))


class TestSetActive:
    def test_excluded_from_start(self):
        g = new_graph(["A", "B"]).set_active("A", False)
        assert [t for t, _ in g.successors(START)] == ["B"]

    def test_inactive_self_loop_still_visible(self):
        g = new_graph(["A", "B"]).set_active("A", False)
        assert [t for t, _ in g.successors("A")] == ["A", "B", END]
        assert [t for t, _ in g.successors("B")] == ["B", END]

    def test_involution(self):
        g = new_graph(["A", "B", "C"])
        before = {n: g.successors(n) for n in ["A", "B", "C", START]}
        g.set_active("A", False).set_active("A", True)
        assert {n: g.successors(n) for n in ["A", "B", "C", START]} == before

    def test_weights_untouched(self):
        g = new_graph(["A", "B"])
        before = [(e.prior_weight, e.current_weight) for e in g.edges()]
        g.set_active("B", False)
        assert [(e.prior_weight, e.current_weight) for e in g.edges()] == before

    def test_unknown(self):
        with pytest.raises(UnknownNode):
            new_graph(["A"]).set_active("Z", False)


class TestDegreeCheck:
    def test_uniform(self):
        rep = new_graph(["A", "B", "C"]).degree_check()
        assert rep.ok
        for t in "ABC":
            assert rep.row(t).out_degree == 4
            assert rep.row(t).deviation == 0.0
        assert rep.row(START).out_degree == 3

    def test_corrupted_weight_flagged(self):
        g = new_graph(["A", "B", "C"]).set_weight("B", "C", current=0.5)
        rep = g.degree_check()
        assert rep.flagged == ["B"]
        assert rep.row("B").deviation == pytest.approx(0.25)

    def test_static_out_degree(self):
        g = static_construct(["A", "B", "C"], corpus(["A", "B"], ["A", "B"], ["A", "C"]))
        rep = g.degree_check()
        assert rep.row("A").out_degree == 2
        assert rep.row("B").out_degree == 1
        assert rep.ok


class TestStructure:
    def test_missing_self_loop_rejected(self):
        edges = [(START, "A", 1.0, 1.0), ("A", END, 1.0, 1.0)]
        with pytest.raises(MalformedGraph):
            ToolGraph(["A"], edges)

    @pytest.mark.parametrize(
        "extra",
        [(END, "A", 0.0, 0.0), ("A", START, 0.0, 0.0), (START, END, 0.0, 0.0), ("A", "Z", 0.0, 0.0)],
    )
    def test_forbidden_edges(self, extra):
        edges = [(START, "A", 1.0, 1.0), ("A", "A", 0.5, 0.5), ("A", END, 0.5, 0.5), extra]
        with pytest.raises(MalformedGraph):
            ToolGraph(["A"], edges)

    def test_duplicate_edge(self):
        edges = [(START, "A", 1.0, 1.0), ("A", "A", 0.5, 0.5), ("A", END, 0.5, 0.5), ("A", END, 0.5, 0.5)]
        with pytest.raises(MalformedGraph):
            ToolGraph(["A"], edges)

    @pytest.mark.parametrize("w", [-0.1, 1.5, float("nan"), "x"])
    def test_weight_range(self, w):
        edges = [(START, "A", 1.0, 1.0), ("A", "A", w, 0.5), ("A", END, 0.5, 0.5)]
        with pytest.raises(MalformedGraph):
            ToolGraph(["A"], edges)


class TestSerialisation:
    def test_format(self):
        g = new_graph([ToolNode("B", "bee", "insects"), ToolNode("A", "ay")], UpdateParams(0.25, 0.5))
        doc = json.loads(g.dumps())
        assert doc["format_version"] == 1
        assert doc["params"] == {"alpha": 0.25, "beta": 0.5}
        assert doc["iteration"] == 0
        assert [n["id"] for n in doc["nodes"]] == ["A", "B"]
        assert doc["nodes"][1] == {
            "id": "B",
            "description": "bee",
            "category": "insects",
            "accumulated_score": 0,
            "active": True,
        }
        pairs = [(e["from"], e["to"]) for e in doc["edges"]]
        assert pairs == sorted(pairs)
        assert doc["edges"][0]["prior_weight"] == "0.333333333333"

    def test_round_trip(self):
        g = static_construct(["A", "B", "C"], corpus(["A", "B", "C"], ["A", "C"]))
        g.node("B").accumulated_score = -7
        g.iteration = 4
        g.set_active("C", False)
        text = g.dumps()
        h = ToolGraph.loads(text)
        assert h.dumps() == text
        assert h.iteration == 4
        assert h.node("B").accumulated_score == -7
        assert not h.node("C").active

    def test_rejects_bad_version(self):
        doc = json.loads(new_graph(["A"]).dumps())
        doc["format_version"] = 2
        with pytest.raises(MalformedGraph):
            ToolGraph.from_dict(doc)

    def test_rejects_non_json(self):
        with pytest.raises(MalformedGraph):
            ToolGraph.loads("{nope")


tool_names = st.lists(
    st.text(alphabet="abcdefgXYZ_", min_size=1, max_size=4).filter(lambda s: s not in (START, END)),
    min_size=1,
    max_size=8,
    unique=True,
)


@settings(max_examples=60, deadline=None)
@given(tool_names, st.data())
def test_round_trip_property(names, data):
    g = new_graph(names)
    for t in names:
        g.node(t).accumulated_score = data.draw(st.integers(-50, 50))
        g.node(t).active = data.draw(st.booleans())
    e = data.draw(st.sampled_from(g.edges()))
    g.set_weight(e.source, e.target, current=data.draw(st.floats(0, 1)))
    text = g.dumps()
    assert ToolGraph.loads(text).dumps() == text
    assert_axioms(ToolGraph.loads(text))


@settings(max_examples=60, deadline=None)
@given(tool_names)
def test_new_graph_rows_stochastic(names):
    rep = new_graph(names).degree_check()
    assert rep.ok
    assert all(abs(r.deviation) <= 1e-9 for r in rep.rows)
