"""Start-set retrieval: rank tools by description similarity to the query."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import EmptyCorpus, NoActiveTools, ValidationError
from .graph import START, ToolGraph, ToolNode

DEFAULT_K_RETRIEVAL = 8

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return [tok for tok in _TOKEN_SPLIT.split(text.lower()) if tok]


class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class TfidfEmbedder:
    """Smoothed TF-IDF over a fixed document collection.

    Raw term counts times ``ln((1 + N) / (1 + df)) + 1``. The vocabulary is
    the sorted set of corpus tokens; unseen query tokens are dropped.
    Instances are immutable apart from a memo of embedded texts.
    """

    def __init__(self, corpus: Sequence[str]):
        if not corpus:
            raise EmptyCorpus("cannot fit TF-IDF on an empty corpus")
        docs = [set(tokenize(d)) for d in corpus]
        df: dict[str, int] = {}
        for toks in docs:
            for tok in toks:
                df[tok] = df.get(tok, 0) + 1
        self.vocabulary = sorted(df)
        self._column = {tok: k for k, tok in enumerate(self.vocabulary)}
        n = len(corpus)
        self.idf = np.array([math.log((1 + n) / (1 + df[tok])) + 1.0 for tok in self.vocabulary], dtype=np.float64)
        self.dimension = len(self.vocabulary)
        self._memo: dict[str, np.ndarray] = {}

    def embed(self, text: str) -> np.ndarray:
        vec = self._memo.get(text)
        if vec is None:
            vec = np.zeros(self.dimension, dtype=np.float64)
            for tok in tokenize(text):
                k = self._column.get(tok)
                if k is not None:
                    vec[k] += 1.0
            vec *= self.idf
            vec.flags.writeable = False
            self._memo[text] = vec
        return vec


def tfidf_embed(corpus: Sequence[str]) -> TfidfEmbedder:
    return TfidfEmbedder(corpus)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return max(-1.0, min(1.0, float(np.dot(a, b)) / (na * nb)))


@dataclass(frozen=True)
class StartSet:
    ranked: tuple[tuple[str, float], ...]
    k: int

    @property
    def tools(self) -> list[str]:
        return [t for t, _ in self.ranked]

    def __len__(self) -> int:
        return len(self.ranked)


def select_start_set(
    g: ToolGraph,
    provider: EmbeddingProvider | None,
    query: str,
    k: int = DEFAULT_K_RETRIEVAL,
    graph_native: bool = False,
) -> StartSet:
    """Top-``k`` active tools by cosine similarity of description to query.

    With ``graph_native=True`` the similarity is ignored and every active
    tool is returned in the order of the ``start`` node's successors.
    """
    if not isinstance(k, int) or k < 1:
        raise ValidationError(f"k must be a positive integer, got {k!r}")
    active = [n for n in g.nodes if n.active]
    if not active:
        raise NoActiveTools("every tool is inactive")
    if graph_native:
        ranked = tuple((t, 0.0) for t, _ in g.successors(START, epsilon=-1.0))
        return StartSet(ranked, len(ranked))
    if provider is None:
        raise ValidationError("an embedding provider is required unless graph_native=True")
    q = provider.embed(query)
    scored = [(n.id, cosine(q, provider.embed(n.description))) for n in active]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return StartSet(tuple(scored[:k]), k)


def provider_for(g: ToolGraph) -> TfidfEmbedder:
    return TfidfEmbedder([n.description for n in g.nodes])


def load_registry(path) -> list[ToolNode]:
    """Read a tool registry: ``[{"id", "description", "category"}, ...]``."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"registry is not valid JSON: {exc}") from None
    if not isinstance(data, list):
        raise ValidationError("registry must be a JSON array")
    try:
        return [ToolNode(d["id"], d.get("description", ""), d.get("category")) for d in data]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed registry entry: {exc}") from None
