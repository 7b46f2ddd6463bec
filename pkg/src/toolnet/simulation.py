"""Deterministic scenario engine and trajectory statistics.

A scenario alternates sessions and graph updates: run one session against
the current graph, score its trajectory with the rubric oracle, fold the
report into the graph, record every tool's score and mean inbound weight.
All randomness comes from one numpy PCG64 generator seeded by the scenario.
"""
from __future__ import annotations

import csv
import enum
import io
import json
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .construction import (
    EvaluatorReport,
    OracleRubric,
    Outcome,
    Step,
    Trajectory,
    apply_evaluation,
    evaluate_trajectory_oracle,
    static_construct,
)
from .errors import EmptyCorpus, EnvironmentFault, InvalidSpec, SpecMismatch, ValidationError
from .graph import END, ToolGraph, ToolNode, UpdateParams, format_weight, new_graph
from .navigation import (
    Environment,
    GreedyPolicy,
    ScriptedPolicy,
    SessionConfig,
    SessionResult,
    WeightFormat,
    WeightedRandomPolicy,
    run_session,
)
from .retrieval import StartSet, TfidfEmbedder, select_start_set

ANSWER_PREFIX = "Answer:"
CRASH_OBSERVATION = "tool unavailable"


class Behavior(str, enum.Enum):
    ANSWER_RELEVANT = "answer_relevant"
    NOISY_NOTHING_FOUND = "noisy_nothing_found"
    NOISY_RANDOM_NUMBER = "noisy_random_number"
    UTILITY = "utility"


class Mode(str, enum.Enum):
    TOOLNET = "toolnet"
    FULL_LIST = "full_list"


@dataclass(frozen=True)
class ToolSpec:
    id: str
    description: str = ""
    category: str | None = None
    behavior: Behavior = Behavior.ANSWER_RELEVANT
    crashes_at: int | None = None

    def crashed(self, iteration: int) -> bool:
        return self.crashes_at is not None and self.crashes_at <= iteration


@dataclass(frozen=True)
class AgentSpec:
    kind: str = "weighted"  # scripted | greedy | weighted
    script: tuple = ()
    finish_on_answer: bool = True


@dataclass(frozen=True)
class ScenarioSpec:
    tools: tuple[ToolSpec, ...]
    agent: AgentSpec = AgentSpec()
    evaluator: OracleRubric = field(default_factory=OracleRubric)
    iterations: int = 100
    seed: int = 0
    mode: Mode = Mode.TOOLNET
    name: str = "scenario"
    queries: tuple[str, ...] = ("Solve the task.",)
    alpha: float = 0.5
    beta: float = 0.3
    max_steps: int = 8
    context_capacity: int = 8
    weight_format: WeightFormat = WeightFormat.TIMES10
    start_k: int | None = None  # None: every tool, in start-node order
    prior_corpus: tuple[Trajectory, ...] = ()
    success_only: bool = True
    assertions: tuple[dict, ...] = ()

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", Mode(self.mode))
            object.__setattr__(self, "weight_format", WeightFormat(self.weight_format))
            tools = tuple(t if isinstance(t, ToolSpec) else ToolSpec(**t) for t in self.tools)
            tools = tuple(replace(t, behavior=Behavior(t.behavior)) for t in tools)
        except (ValueError, TypeError) as exc:
            raise InvalidSpec(str(exc)) from None
        object.__setattr__(self, "tools", tools)
        if not tools:
            raise InvalidSpec("scenario needs at least one tool")
        if len({t.id for t in tools}) != len(tools):
            raise InvalidSpec("duplicate tool ids in scenario")
        for t in tools:
            if t.crashes_at is not None and (not isinstance(t.crashes_at, int) or t.crashes_at < 1):
                raise InvalidSpec(f"crashes_at of {t.id!r} must be an integer >= 1")
        if not isinstance(self.iterations, int) or self.iterations < 0:
            raise InvalidSpec("iterations must be a non-negative integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise InvalidSpec("seed must be an unsigned 64-bit integer")
        if self.agent.kind not in ("scripted", "greedy", "weighted"):
            raise InvalidSpec(f"unknown agent kind {self.agent.kind!r}")
        if self.start_k is not None and (not isinstance(self.start_k, int) or self.start_k < 1):
            raise InvalidSpec("start_k must be a positive integer")
        if not self.queries:
            raise InvalidSpec("at least one query is required")
        for k in ("max_steps", "context_capacity"):
            v = getattr(self, k)
            if not isinstance(v, int) or v < 1:
                raise InvalidSpec(f"{k} must be a positive integer")
        try:
            UpdateParams(self.alpha, self.beta)
        except ValidationError as exc:
            raise InvalidSpec(str(exc)) from None

    @property
    def tool_nodes(self) -> list[ToolNode]:
        return [ToolNode(t.id, t.description, t.category) for t in self.tools]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "tools": [
                {
                    "id": t.id,
                    "description": t.description,
                    "category": t.category,
                    "behavior": t.behavior.value,
                    "crashes_at": t.crashes_at,
                }
                for t in self.tools
            ],
            "agent": {"kind": self.agent.kind, "script": [list(e) if not isinstance(e, str) else e for e in self.agent.script], "finish_on_answer": self.agent.finish_on_answer},
            "evaluator": self.evaluator.to_dict(),
            "iterations": self.iterations,
            "seed": self.seed,
            "mode": self.mode.value,
            "queries": list(self.queries),
            "alpha": self.alpha,
            "beta": self.beta,
            "max_steps": self.max_steps,
            "context_capacity": self.context_capacity,
            "weight_format": self.weight_format.value,
            "start_k": self.start_k,
            "prior_corpus": [t.to_dict() for t in self.prior_corpus],
            "success_only": self.success_only,
            "assertions": [dict(a) for a in self.assertions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioSpec:
        if not isinstance(data, dict):
            raise InvalidSpec("scenario must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidSpec(f"unknown scenario keys: {sorted(unknown)}")
        kw = dict(data)
        try:
            kw["tools"] = tuple(ToolSpec(**t) for t in data.get("tools", ()))
            if "agent" in data:
                a = dict(data["agent"])
                a["script"] = tuple(e if isinstance(e, str) else tuple(e) for e in a.get("script", ()))
                kw["agent"] = AgentSpec(**a)
            if "evaluator" in data:
                kw["evaluator"] = OracleRubric.from_dict(data["evaluator"])
            if "queries" in data:
                kw["queries"] = tuple(data["queries"])
            if "prior_corpus" in data:
                kw["prior_corpus"] = tuple(Trajectory.from_dict(t) for t in data["prior_corpus"])
            if "assertions" in data:
                kw["assertions"] = tuple(dict(a) for a in data["assertions"])
            return cls(**kw)
        except InvalidSpec:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise InvalidSpec(f"malformed scenario: {exc}") from None

    @classmethod
    def load(cls, path) -> ScenarioSpec:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"scenario is not valid JSON: {exc}") from None
        return cls.from_dict(data)


class SimulatedEnvironment(Environment):
    """Tool behaviours of one scenario at one iteration."""

    def __init__(self, spec: ScenarioSpec, iteration: int, rng: np.random.Generator, query: str):
        super().__init__(query)
        self.tools = {t.id: t for t in spec.tools}
        self.iteration = iteration
        self.rng = rng

    def execute(self, tool, arguments):
        t = self.tools[tool]
        if t.crashed(self.iteration):
            raise EnvironmentFault(CRASH_OBSERVATION)
        if t.behavior is Behavior.ANSWER_RELEVANT:
            return f"{ANSWER_PREFIX} {tool} produced the result."
        if t.behavior is Behavior.NOISY_NOTHING_FOUND:
            return "Nothing Found"
        if t.behavior is Behavior.NOISY_RANDOM_NUMBER:
            return str(int(self.rng.integers(0, 1_000_000)))
        return f"OK: {tool} done."

    def outcome(self, steps: Sequence[Step]) -> Outcome:
        if any(s.observation.startswith(ANSWER_PREFIX) for s in steps):
            return Outcome.SUCCESS
        return Outcome.FAILURE


def build_policy(agent: AgentSpec, rng: np.random.Generator):
    if agent.kind == "scripted":
        return ScriptedPolicy(agent.script)
    if agent.kind == "greedy":
        return GreedyPolicy(finish_on_answer=agent.finish_on_answer, answer_prefix=ANSWER_PREFIX)
    return WeightedRandomPolicy(rng, finish_on_answer=agent.finish_on_answer, answer_prefix=ANSWER_PREFIX)


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    accumulated_score: int
    mean_inbound_weight: float


@dataclass
class ScoreTrace:
    series: dict[str, list[TracePoint]] = field(default_factory=dict)

    def record(self, iteration: int, g: ToolGraph) -> None:
        inbound = g.mean_inbound_weights()
        for tool in g.tool_ids:
            self.series.setdefault(tool, []).append(
                TracePoint(iteration, g.node(tool).accumulated_score, inbound[tool])
            )

    def scores(self, tool: str) -> list[int]:
        return [p.accumulated_score for p in self.series.get(tool, [])]

    def inbound(self, tool: str) -> list[float]:
        return [p.mean_inbound_weight for p in self.series.get(tool, [])]

    def __len__(self) -> int:
        return max((len(v) for v in self.series.values()), default=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "tool_id", "accumulated_score", "mean_inbound_weight"])
        rows = [
            (p.iteration, tool, p.accumulated_score, p.mean_inbound_weight)
            for tool, pts in self.series.items()
            for p in pts
        ]
        rows.sort(key=lambda r: (r[0], r[1]))
        for it, tool, score, inbound in rows:
            w.writerow([it, tool, score, format_weight(inbound)])
        return buf.getvalue()


@dataclass
class ScenarioResult:
    trace: ScoreTrace
    sessions: list[SessionResult]
    graph_final: ToolGraph
    mode: Mode = Mode.TOOLNET

    @property
    def total_tokens(self) -> int:
        return sum(s.tokens_used for s in self.sessions)

    def summary(self) -> dict:
        return {
            "mode": self.mode.value,
            "iterations": len(self.sessions),
            "total_tokens": self.total_tokens,
            "finished_sessions": sum(1 for s in self.sessions if s.finished),
            "successful_sessions": sum(1 for s in self.sessions if s.outcome is Outcome.SUCCESS),
            "final_scores": self.graph_final.scores(),
        }


def initial_graph(spec: ScenarioSpec) -> ToolGraph:
    params = UpdateParams(spec.alpha, spec.beta)
    if spec.prior_corpus:
        return static_construct(spec.tool_nodes, spec.prior_corpus, spec.success_only, params)
    return new_graph(spec.tool_nodes, params)


def run_scenario(spec: ScenarioSpec, prior: ToolGraph | None = None) -> ScenarioResult:
    """Run ``spec.iterations`` rounds of session, evaluation and update.

    ``prior`` overrides the graph derived from the scenario; it is copied, never
    mutated.
    """
    g = prior.copy() if prior is not None else initial_graph(spec)
    missing = {t.id for t in spec.tools} - set(g.tool_ids)
    if missing:
        raise InvalidSpec(f"prior graph lacks scenario tools: {sorted(missing)}")
    rng = np.random.default_rng(spec.seed)
    provider = None
    if spec.start_k is not None and spec.mode is Mode.TOOLNET:
        provider = TfidfEmbedder([n.description for n in g.nodes])

    trace = ScoreTrace()
    sessions: list[SessionResult] = []
    for it in range(1, spec.iterations + 1):
        query = spec.queries[(it - 1) % len(spec.queries)]
        if spec.mode is Mode.FULL_LIST:
            start = StartSet((), 0)
        elif provider is None:
            start = select_start_set(g, None, query, graph_native=True)
        else:
            start = select_start_set(g, provider, query, spec.start_k)
        cfg = SessionConfig(
            max_steps=spec.max_steps,
            context_capacity=spec.context_capacity,
            weight_format=spec.weight_format,
            full_list=spec.mode is Mode.FULL_LIST,
            task_id=f"{spec.name}-{it}",
        )
        env = SimulatedEnvironment(spec, it, rng, query)
        result = run_session(g, start, env, build_policy(spec.agent, rng), cfg)
        sessions.append(result)

        traj = result.trajectory
        if traj is None:
            report = EvaluatorReport(cfg.task_id, [])
        else:
            crashed = [t.id for t in spec.tools if t.crashed(it)]
            report = evaluate_trajectory_oracle(traj, spec.evaluator.with_errors(crashed))
        apply_evaluation(g, report)
        trace.record(it, g)
    return ScenarioResult(trace, sessions, g, spec.mode)


# -- scenario checks ---------------------------------------------------------


def find_crossover(result: ScenarioResult, primary: str, fallback: str) -> int | None:
    """First iteration from which the fallback wins for good.

    From that iteration on, the fallback's mean inbound weight strictly
    exceeds the primary's at every trace point, and every later session
    calls the fallback and never the primary.
    """
    p_in = result.trace.inbound(primary)
    f_in = result.trace.inbound(fallback)
    n = len(result.sessions)
    crossover = None
    for k in range(n - 1, -1, -1):
        ok = f_in[k] > p_in[k]
        if k + 1 < n:
            later = result.sessions[k + 1].tools
            ok = ok and fallback in later and primary not in later
        if not ok:
            break
        crossover = k + 1
    return crossover


def check_assertions(spec: ScenarioSpec, result: ScenarioResult) -> list[tuple[dict, bool, str]]:
    """Evaluate the scenario's declared assertions against a run."""
    out = []
    scores = result.graph_final.scores()
    for a in spec.assertions:
        kind = a.get("kind")
        if kind == "final_score_gt":
            s = scores.get(a["tool"])
            out.append((a, s is not None and s > a.get("value", 0), f"score={s}"))
        elif kind == "final_score_le":
            s = scores.get(a["tool"])
            out.append((a, s is not None and s <= a.get("value", 0), f"score={s}"))
        elif kind == "crossover":
            n_star = find_crossover(result, a["primary"], a["fallback"])
            out.append((a, n_star is not None, f"crossover={n_star}"))
        else:
            raise InvalidSpec(f"unknown assertion kind {kind!r}")
    return out


@dataclass(frozen=True)
class TokenComparison:
    toolnet_tokens: int
    full_list_tokens: int
    ratio: float | None  # None when the full-list run used no tokens

    def to_dict(self) -> dict:
        return {"toolnet_tokens": self.toolnet_tokens, "full_list_tokens": self.full_list_tokens, "ratio": self.ratio}


def compare_token_usage(specs: tuple[ScenarioSpec, ScenarioSpec], prior: ToolGraph | None = None) -> TokenComparison:
    a, b = specs
    if replace(a, mode=Mode.TOOLNET) != replace(b, mode=Mode.TOOLNET) or a.mode == b.mode:
        raise SpecMismatch("token comparison needs two specs that differ only in mode")
    toolnet, full = (a, b) if a.mode is Mode.TOOLNET else (b, a)
    t_tokens = run_scenario(toolnet, prior).total_tokens
    f_tokens = run_scenario(full, prior).total_tokens
    ratio = t_tokens / f_tokens if f_tokens else None
    return TokenComparison(t_tokens, f_tokens, ratio)


# -- corpus statistics ---------------------------------------------------------

BUCKETS = ("1", "2", "3", "4", "5", ">5")


def bucket(n: int) -> str:
    return str(n) if n <= 5 else ">5"


@dataclass
class CorpusCounts:
    """Raw counts behind a sparsity report; merging is plain addition."""

    successors: dict[str, set[str]] = field(default_factory=dict)
    calls: Counter = field(default_factory=Counter)

    @classmethod
    def from_corpus(cls, corpus: Iterable[Trajectory]) -> CorpusCounts:
        counts = cls()
        for t in corpus:
            tools = t.tools
            counts.calls.update(tools)
            for a, b in zip(tools, tools[1:]):
                counts.successors.setdefault(a, set()).add(b)
            for a in tools:
                counts.successors.setdefault(a, set())
        return counts

    def merge(self, other: CorpusCounts) -> CorpusCounts:
        succ = {k: set(v) for k, v in self.successors.items()}
        for k, v in other.successors.items():
            succ.setdefault(k, set()).update(v)
        return CorpusCounts(succ, self.calls + other.calls)


@dataclass
class SparsityReport:
    successor_count_histogram: dict[str, float]
    call_count_histogram: dict[str, float]
    top_tools: list[tuple[str, int]]
    tools_counted: int
    tools_with_successors: int

    @property
    def degenerate(self) -> bool:
        return self.tools_with_successors == 0

    def to_dict(self) -> dict:
        return {
            "successor_count_histogram": self.successor_count_histogram,
            "call_count_histogram": self.call_count_histogram,
            "top_tools": [{"tool": t, "successors": n} for t, n in self.top_tools],
            "tools_counted": self.tools_counted,
            "tools_with_successors": self.tools_with_successors,
            "degenerate": self.degenerate,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _histogram(values: list[int]) -> dict[str, float]:
    hist = {b: 0.0 for b in BUCKETS}
    if not values:
        return hist
    counts = Counter(bucket(v) for v in values)
    for b in BUCKETS:
        hist[b] = counts.get(b, 0) / len(values)
    return hist


def sparsity_from_counts(counts: CorpusCounts, top_n: int = 10) -> SparsityReport:
    """Histograms of distinct-successor counts and call counts per tool.

    ``end`` is not a successor, and tools with no observed successor are
    left out of the successor histogram (but not the call histogram).
    """
    succ = {t: len(s - {END}) for t, s in counts.successors.items()}
    with_succ = [n for n in succ.values() if n > 0]
    top = sorted(succ.items(), key=lambda item: (-item[1], item[0]))[:top_n]
    return SparsityReport(
        successor_count_histogram=_histogram(with_succ),
        call_count_histogram=_histogram(list(counts.calls.values())),
        top_tools=top,
        tools_counted=len(counts.calls),
        tools_with_successors=len(with_succ),
    )


def analyze_corpus(corpus: Sequence[Trajectory], top_n: int = 10) -> SparsityReport:
    if not corpus:
        raise EmptyCorpus("cannot analyse an empty corpus")
    return sparsity_from_counts(CorpusCounts.from_corpus(corpus), top_n)


# -- synthetic libraries ---------------------------------------------------------

_VERBS = ("fetch", "search", "convert", "summarize", "translate", "validate", "compute", "list", "update", "score")
_NOUNS = ("weather", "stock", "invoice", "playlist", "recipe", "flight", "ticket", "profile", "album", "article")


def synthetic_library(n_tools: int, seed: int = 0) -> list[ToolSpec]:
    """``n_tools`` tools with short, varied descriptions.

    Every tenth tool answers the task; the rest are utilities.
    """
    rng = np.random.default_rng(seed)
    width = len(str(n_tools - 1))
    tools = []
    for i in range(n_tools):
        verb = _VERBS[int(rng.integers(len(_VERBS)))]
        noun = _NOUNS[int(rng.integers(len(_NOUNS)))]
        desc = f"{verb} {noun} records from the {noun} service and return a short report"
        behavior = Behavior.ANSWER_RELEVANT if i % 10 == 9 else Behavior.UTILITY
        tools.append(ToolSpec(f"tool_{i:0{width}d}", desc, noun, behavior))
    return tools


def sparse_chain_corpus(tool_ids: Sequence[str], out_degree: int) -> list[Trajectory]:
    """Corpus giving tool ``i`` exactly ``out_degree`` observed successors.

    The successors are the next ``out_degree - 1`` tools (cyclically) plus
    ``end``; self-loops are never observed.
    """
    n = len(tool_ids)
    if out_degree < 1 or out_degree - 1 >= n:
        raise ValidationError("out_degree must be in [1, n_tools]")
    corpus = []
    for i, tool in enumerate(tool_ids):
        corpus.append(Trajectory(f"{tool}-end", "", [Step(tool)]))
        for d in range(1, out_degree):
            nxt = tool_ids[(i + d) % n]
            corpus.append(Trajectory(f"{tool}-{nxt}", "", [Step(tool), Step(nxt)]))
    return corpus


def dumps_scenario(spec: ScenarioSpec) -> str:
    return json.dumps(spec.to_dict(), sort_keys=True, indent=2) + "\n"


__all__ = [
    "AgentSpec",
    "Behavior",
    "CorpusCounts",
    "Mode",
    "ScenarioResult",
    "ScenarioSpec",
    "ScoreTrace",
    "SparsityReport",
    "TokenComparison",
    "ToolSpec",
    "analyze_corpus",
    "check_assertions",
    "compare_token_usage",
    "find_crossover",
    "run_scenario",
    "sparse_chain_corpus",
    "sparsity_from_counts",
    "synthetic_library",
]
