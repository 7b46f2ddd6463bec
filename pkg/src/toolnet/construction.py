"""Edge-weight construction.

Static construction counts tool bigrams over trajectories that finished
their task. Dynamic construction accumulates per-tool evaluator scores and
re-derives every tool row from them::

    w_ij = beta * w0_ij + (1 - beta) * f(s_j) / sum_{k in out(i)} f(s_k)
    f(x) = alpha * x + 1   if x >= 0
           exp(alpha * x)  if x < 0

``s_end`` is fixed at 0, and ``start`` rows are never touched.
"""
from __future__ import annotations

import enum
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import (
    EmptyCorpus,
    NonPositiveAlpha,
    ScoreOutOfRange,
    UnknownToolInCorpus,
    UnknownToolInReport,
    ValidationError,
)
from .graph import END, START, ToolGraph, UpdateParams, _as_node, validate_tool_id

SCORE_MIN, SCORE_MAX = -3, 3


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    GAVE_UP = "gave_up"


@dataclass
class Step:
    tool: str
    thought: str = ""
    arguments: str = ""
    observation: str = ""

    def __post_init__(self):
        validate_tool_id(self.tool)


@dataclass
class Trajectory:
    task_id: str
    query: str
    steps: list[Step]
    outcome: Outcome = Outcome.SUCCESS

    def __post_init__(self):
        if not self.steps:
            raise ValidationError(f"trajectory {self.task_id!r} has no steps")
        self.outcome = Outcome(self.outcome)

    @property
    def tools(self) -> list[str]:
        return [s.tool for s in self.steps]

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "query": self.query,
            "outcome": self.outcome.value,
            "steps": [
                {"tool": s.tool, "thought": s.thought, "arguments": s.arguments, "observation": s.observation}
                for s in self.steps
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> Trajectory:
        try:
            steps = [
                Step(
                    tool=s["tool"],
                    thought=s.get("thought", ""),
                    arguments=s.get("arguments", ""),
                    observation=s.get("observation", ""),
                )
                for s in data["steps"]
            ]
            return cls(
                task_id=str(data["task_id"]),
                query=data.get("query", ""),
                steps=steps,
                outcome=Outcome(data.get("outcome", "success")),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed trajectory: {exc}") from None
        except ValueError as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed trajectory: {exc}") from None


def read_trajectories(path) -> list[Trajectory]:
    """Read a JSON Lines file, one trajectory per line. Blank lines are skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{line_num}: invalid JSON ({exc})") from None
            out.append(Trajectory.from_dict(data))
    return out


def dumps_trajectories(trajectories: Iterable[Trajectory]) -> str:
    return "".join(json.dumps(t.to_dict(), sort_keys=True, ensure_ascii=False) + "\n" for t in trajectories)


def write_trajectories(path, trajectories: Iterable[Trajectory]) -> None:
    Path(path).write_text(dumps_trajectories(trajectories), encoding="utf-8")


@dataclass(frozen=True)
class ScoreEntry:
    tool: str
    score: int
    reason: str = ""


@dataclass
class EvaluatorReport:
    """Per-tool integer scores for one trajectory, in ``[-3, 3]``."""

    trajectory_id: str
    scores: list[ScoreEntry] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for entry in self.scores:
            if not isinstance(entry.score, int) or isinstance(entry.score, bool):
                raise ScoreOutOfRange(f"score for {entry.tool!r} must be an integer, got {entry.score!r}")
            if not SCORE_MIN <= entry.score <= SCORE_MAX:
                raise ScoreOutOfRange(f"score {entry.score} for {entry.tool!r} outside [{SCORE_MIN}, {SCORE_MAX}]")
            if entry.tool in seen:
                raise ValidationError(f"tool {entry.tool!r} scored twice in one report")
            seen.add(entry.tool)

    def to_dict(self) -> dict:
        return {
            "trajectory_id": self.trajectory_id,
            "scores_of_tools": [{"tool_name": e.tool, "score": e.score, "reason": e.reason} for e in self.scores],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> EvaluatorReport:
        try:
            entries = [ScoreEntry(e["tool_name"], e["score"], e.get("reason", "")) for e in data["scores_of_tools"]]
            return cls(str(data.get("trajectory_id", "")), entries)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed evaluator report: {exc}") from None

    @classmethod
    def load(cls, path) -> EvaluatorReport:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"report is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -- static construction -------------------------------------------------


def count_bigrams(corpus: Iterable[Trajectory]) -> Counter:
    """Consecutive tool pairs, with ``end`` appended to every trajectory."""
    counts: Counter = Counter()
    for t in corpus:
        seq = t.tools + [END]
        counts.update(zip(seq, seq[1:]))
    return counts


def static_construct(
    tools: Sequence,
    corpus: Iterable[Trajectory],
    success_only: bool = True,
    params: UpdateParams | None = None,
) -> ToolGraph:
    """Build a graph whose tool rows are bigram frequencies of ``corpus``.

    Self-loops and ``end`` edges that were never observed are kept at weight
    0. Tools that never occur before another symbol get the uniform row of
    :func:`~toolnet.graph.new_graph`; ``start`` is uniform over tools. The
    resulting weights double as the prior for later dynamic updates.
    """
    nodes = [_as_node(t) for t in tools]
    for n in nodes:
        n.accumulated_score = 0
    ids = [n.id for n in nodes]
    known = set(ids)

    kept = [t for t in corpus if not success_only or t.outcome is Outcome.SUCCESS]
    if not kept:
        raise EmptyCorpus("no trajectories left to count" + (" (success_only=True)" if success_only else ""))
    for t in kept:
        for tool in t.tools:
            if tool not in known:
                raise UnknownToolInCorpus(f"trajectory {t.task_id!r} uses unknown tool {tool!r}")

    rows: dict[str, dict[str, int]] = {}
    for (src, dst), c in count_bigrams(kept).items():
        rows.setdefault(src, {})[dst] = c

    n = len(ids)
    edges = []
    if n:
        w_start = 1.0 / n
        edges.extend((START, t, w_start, w_start) for t in ids)
    uniform = 1.0 / (n + 1) if n else 0.0
    for src in ids:
        observed = rows.get(src)
        if not observed:
            edges.extend((src, t, uniform, uniform) for t in ids)
            edges.append((src, END, uniform, uniform))
            continue
        total = sum(observed.values())
        row = {dst: c / total for dst, c in observed.items()}
        row.setdefault(src, 0.0)
        row.setdefault(END, 0.0)
        edges.extend((src, dst, w, w) for dst, w in row.items())
    return ToolGraph(nodes, edges, params=params)


# -- dynamic construction ------------------------------------------------


def f_map(x: int, alpha: float) -> float:
    """Map an accumulated score onto a positive weight, increasing in ``x``."""
    if not (isinstance(alpha, (int, float)) and math.isfinite(alpha) and alpha > 0):
        raise NonPositiveAlpha(f"alpha must be positive, got {alpha!r}")
    if x >= 0:
        return alpha * x + 1.0
    return math.exp(alpha * x)


def _fvalues(g: ToolGraph) -> np.ndarray:
    alpha = g.params.alpha
    vals = [f_map(n.accumulated_score, alpha) for n in g.nodes]
    vals.append(1.0)  # start: never a target
    vals.append(f_map(0, alpha))  # end
    return np.asarray(vals, dtype=np.float64)


def recompute_weights(g: ToolGraph) -> ToolGraph:
    """Re-derive every tool row from the prior and the current scores."""
    kernels.reweight_rows(g._indptr, g._indices, g._prior, _fvalues(g), float(g.params.beta), g.num_tools, g._current)
    return g


def apply_evaluation(g: ToolGraph, report: EvaluatorReport) -> ToolGraph:
    """Fold one evaluator report into ``g`` in place and return it.

    The report is validated in full before anything changes.
    """
    for entry in report.scores:
        if entry.tool not in g or entry.tool in (START, END):
            raise UnknownToolInReport(f"report scores unknown tool {entry.tool!r}")
        if not SCORE_MIN <= entry.score <= SCORE_MAX:
            raise ScoreOutOfRange(f"score {entry.score} for {entry.tool!r} outside [{SCORE_MIN}, {SCORE_MAX}]")
    for entry in report.scores:
        g.node(entry.tool).accumulated_score += entry.score
    g.iteration += 1
    return recompute_weights(g)


# -- deterministic evaluator ---------------------------------------------


def clamp_score(x: int) -> int:
    return max(SCORE_MIN, min(SCORE_MAX, x))


@dataclass
class OracleRubric:
    """Rule-based stand-in for the LLM tool evaluator.

    A tool's score is ``base[tool] + modifiers[outcome]``, clamped to
    ``[-3, 3]``. Tools listed in ``errored`` use ``error_base`` instead of
    their base, mirroring the evaluator instruction to mark down tools that
    return errors.
    """

    base: dict[str, int] = field(default_factory=dict)
    modifiers: dict[str, int] = field(
        default_factory=lambda: {"success": 1, "failure": -1, "gave_up": -1}
    )
    error_base: int = -2
    errored: frozenset = frozenset()

    def __post_init__(self):
        self.modifiers = {Outcome(k).value: int(v) for k, v in self.modifiers.items()}

    def with_errors(self, tools: Iterable[str]) -> OracleRubric:
        return OracleRubric(dict(self.base), dict(self.modifiers), self.error_base, frozenset(tools))

    def to_dict(self) -> dict:
        return {"base": dict(self.base), "modifiers": dict(self.modifiers), "error_base": self.error_base}

    @classmethod
    def from_dict(cls, data: Mapping) -> OracleRubric:
        kwargs = {"base": {str(k): int(v) for k, v in data.get("base", {}).items()}}
        if "modifiers" in data:
            kwargs["modifiers"] = dict(data["modifiers"])
        if "error_base" in data:
            kwargs["error_base"] = int(data["error_base"])
        return cls(**kwargs)


def evaluate_trajectory_oracle(t: Trajectory, rubric: OracleRubric) -> EvaluatorReport:
    modifier = rubric.modifiers.get(t.outcome.value, 0)
    entries = []
    seen = set()
    for tool in t.tools:
        if tool in seen:
            continue
        seen.add(tool)
        if tool in rubric.errored:
            score = clamp_score(rubric.error_base + modifier)
            reason = f"returned errors; outcome {t.outcome.value}"
        elif tool in rubric.base:
            score = clamp_score(rubric.base[tool] + modifier)
            reason = f"base {rubric.base[tool]:+d}, outcome {t.outcome.value} ({modifier:+d})"
        else:
            score, reason = 0, "not in rubric"
        entries.append(ScoreEntry(tool, score, reason))
    return EvaluatorReport(t.task_id, entries)
