import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toolnet.errors import EmptyCorpus, NoActiveTools, ValidationError
from toolnet.graph import ToolNode, new_graph
from toolnet.retrieval import (
    TfidfEmbedder,
    cosine,
    load_registry,
    provider_for,
    select_start_set,
    tokenize,
)


def test_tokenize():
    assert tokenize("Search the Web, quickly!") == ["search", "the", "web", "quickly"]
    assert tokenize("get_user-token2") == ["get", "user", "token2"]
    assert tokenize("  ") == []


class TestTfidf:
    corpus = ["alpha beta", "beta gamma", "gamma delta"]

    def test_query_hits_one_column(self):
        emb = TfidfEmbedder(self.corpus)
        assert emb.vocabulary == ["alpha", "beta", "delta", "gamma"]
        v = emb.embed("beta")
        assert np.count_nonzero(v) == 1
        assert v[emb.vocabulary.index("beta")] > 0

    def test_idf_values(self):
        emb = TfidfEmbedder(self.corpus)
        # beta appears in 2 of 3 documents
        assert emb.idf[1] == pytest.approx(math.log(4 / 3) + 1)
        assert emb.idf[0] == pytest.approx(math.log(4 / 2) + 1)

    def test_oov_is_zero(self):
        emb = TfidfEmbedder(self.corpus)
        assert not emb.embed("zzz").any()
        assert cosine(emb.embed("zzz"), emb.embed("alpha")) == 0.0

    def test_term_in_every_document(self):
        emb = TfidfEmbedder(["a", "a"])
        assert emb.idf.tolist() == [1.0]

    def test_dimension(self):
        assert TfidfEmbedder(self.corpus).dimension == 4

    def test_deterministic(self):
        a, b = TfidfEmbedder(self.corpus), TfidfEmbedder(self.corpus)
        assert a.embed("alpha gamma").tolist() == b.embed("alpha gamma").tolist()

    def test_vectors_read_only(self):
        v = TfidfEmbedder(self.corpus).embed("alpha")
        with pytest.raises(ValueError):
            v[0] = 1.0

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            TfidfEmbedder([])


class TestStartSet:
    def graph(self):
        return new_graph([("WikiSearch", "search wikipedia articles"), ("Calc", "evaluate arithmetic")])

    def test_hand_example(self):
        g = self.graph()
        s = select_start_set(g, provider_for(g), "search articles", k=1)
        assert s.tools == ["WikiSearch"]
        # query and document share both terms, each with idf ln(3/2)+1
        i = math.log(1.5) + 1
        assert s.ranked[0][1] == pytest.approx((2 * i * i) / (math.sqrt(2 * i * i) * math.sqrt(3 * i * i)))
        assert s.ranked[0][1] == pytest.approx(2 / (math.sqrt(2) * math.sqrt(3)))

    def test_k_larger_than_library(self):
        g = self.graph()
        s = select_start_set(g, provider_for(g), "search articles", k=8)
        assert s.tools == ["WikiSearch", "Calc"]
        assert len(s) == 2

    def test_identical_descriptions_tie_by_id(self):
        g = new_graph([("Zeta", "fetch weather"), ("Alpha", "fetch weather"), ("Mid", "fetch weather")])
        assert select_start_set(g, provider_for(g), "fetch weather", k=3).tools == ["Alpha", "Mid", "Zeta"]

    def test_zero_overlap_falls_back_to_id_order(self):
        g = new_graph([("B", "one"), ("A", "two"), ("C", "three")])
        s = select_start_set(g, provider_for(g), "nothing matches", k=2)
        assert s.tools == ["A", "B"]
        assert all(sim == 0.0 for _, sim in s.ranked)

    def test_inactive_excluded(self):
        g = self.graph().set_active("WikiSearch", False)
        assert select_start_set(g, provider_for(g), "search", k=2).tools == ["Calc"]

    def test_no_active(self):
        g = self.graph().set_active("WikiSearch", False).set_active("Calc", False)
        with pytest.raises(NoActiveTools):
            select_start_set(g, provider_for(g), "search")

    @pytest.mark.parametrize("k", [0, -1, 1.5])
    def test_bad_k(self, k):
        g = self.graph()
        with pytest.raises(ValidationError):
            select_start_set(g, provider_for(g), "x", k=k)

    def test_provider_required(self):
        with pytest.raises(ValidationError):
            select_start_set(self.graph(), None, "x")

    def test_graph_native(self):
        g = new_graph(["B", "A", "C"])
        g.set_weight("start", "C", current=0.5)
        s = select_start_set(g, None, "ignored", graph_native=True)
        assert s.tools == ["C", "A", "B"]


words = st.sampled_from(["search", "web", "math", "sum", "file", "read", "user", "token", "map"])
descriptions = st.lists(st.lists(words, min_size=0, max_size=5).map(" ".join), min_size=1, max_size=8)


@settings(max_examples=60, deadline=None)
@given(descriptions, st.lists(words, min_size=1, max_size=3).map(" ".join), st.integers(1, 8), st.randoms())
def test_start_set_invariants(descs, query, k, rnd):
    nodes = [ToolNode(f"T{i}", d) for i, d in enumerate(descs)]
    g = new_graph(nodes)
    prov = provider_for(g)
    s = select_start_set(g, prov, query, k)
    assert len(s) == min(k, len(nodes))
    assert all(-1.0 <= sim <= 1.0 for _, sim in s.ranked)
    # the library order given to new_graph does not matter
    shuffled = nodes[:]
    rnd.shuffle(shuffled)
    g2 = new_graph(shuffled)
    assert select_start_set(g2, provider_for(g2), query, k) == s
    # growing k only appends
    bigger = select_start_set(g, prov, query, k + 1)
    assert bigger.tools[: len(s)] == s.tools


@settings(max_examples=100)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_cosine_bounds(a, b):
    c = cosine(np.array(a), np.array(b))
    assert -1.0 <= c <= 1.0


def test_load_registry(tmp_path):
    path = tmp_path / "reg.json"
    path.write_text(json.dumps([{"id": "A", "description": "a tool", "category": "x"}, {"id": "B"}]))
    nodes = load_registry(path)
    assert [(n.id, n.description, n.category) for n in nodes] == [("A", "a tool", "x"), ("B", "", None)]


@pytest.mark.parametrize("text", ["{", "{}", "[{\"description\": \"no id\"}]"])
def test_load_registry_invalid(tmp_path, text):
    path = tmp_path / "reg.json"
    path.write_text(text)
    with pytest.raises(ValidationError):
        load_registry(path)
