"""Agent loop constrained to graph successors.

At step 1 the policy sees the start set; afterwards it sees the successors
of the tool it just used. ``end`` is shown to the policy as ``Finish``.
Each step's prompt (task, context queue, current observation and the
formatted tool list) plus the policy's thought and action are charged to a
whitespace-token budget.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Mapping, Protocol, Sequence

from .construction import Outcome, Step, Trajectory
from .errors import EnvironmentFault, ValidationError
from .graph import END, START, ToolGraph
from .retrieval import StartSet

FINISH = "Finish"
FINISH_DESCRIPTION = "Finish the task and submit the final answer."
DEFAULT_MAX_STEPS = 8
DEFAULT_CONTEXT_CAPACITY = 8

SCORED_HEADER = "Each tool below carries a score; prefer tools with higher scores."
PLAIN_HEADER = "The available tools are listed here."
INSTRUCTIONS = (
    "Solve the task by calling tools, one call per step. Before each call, "
    "state in a few sentences what you know and what you need next. Pick "
    "exactly one tool from the list below and give its arguments. Earlier "
    "calls cannot be undone. When the task is resolved, call Finish with "
    "the final answer; if it cannot be resolved, call Finish and say so."
)


def count_tokens(text: str) -> int:
    """Whitespace-run token proxy. Not a real tokenizer."""
    return len(text.split())


class WeightFormat(str, enum.Enum):
    NONE = "none"
    DIV100 = "div100"
    DIV10 = "div10"
    INTEGER = "integer"
    TIMES10 = "times10"


_QUANTUM = {
    WeightFormat.DIV100: (Decimal(1) / 100, Decimal("0.01")),
    WeightFormat.DIV10: (Decimal(1) / 10, Decimal("0.1")),
    WeightFormat.INTEGER: (Decimal(1), Decimal(1)),
    WeightFormat.TIMES10: (Decimal(10), Decimal(1)),
}


def render_weight(weight: float, fmt: WeightFormat | str) -> str | None:
    """Render ``weight`` in ``[0, 1]`` as a score string.

    The base is the percentage ``100 * weight``; each mode rescales it and
    rounds half away from zero. Returns ``None`` for ``none``.
    """
    fmt = WeightFormat(fmt)
    if fmt is WeightFormat.NONE:
        return None
    scale, quantum = _QUANTUM[fmt]
    pct = Decimal(repr(float(weight))) * 100
    return str((pct * scale).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ToolOption:
    tool: str
    description: str = ""
    weight: float | None = None
    weight_text: str | None = None


def format_tool_context(options: Sequence[ToolOption], fmt: WeightFormat | str = WeightFormat.TIMES10) -> str:
    fmt = WeightFormat(fmt)
    lines = [PLAIN_HEADER if fmt is WeightFormat.NONE else SCORED_HEADER]
    for rank, opt in enumerate(options, 1):
        line = f"{rank}. {opt.tool}"
        # Finish keeps its rank but never shows a score
        rendered = None if opt.weight is None or opt.tool == FINISH else render_weight(opt.weight, fmt)
        if rendered is not None:
            line += f" (score: {rendered})"
        if opt.description:
            line += f" — {opt.description}"
        lines.append(line)
    return "\n".join(lines)


@dataclass(frozen=True)
class ContextEntry:
    observation: str
    thought: str
    tool: str
    arguments: str = ""


class SessionContext:
    """Bounded FIFO of past (observation, thought, action) tuples."""

    def __init__(self, capacity: int = DEFAULT_CONTEXT_CAPACITY):
        if not isinstance(capacity, int) or capacity < 1:
            raise ValidationError(f"context capacity must be a positive integer, got {capacity!r}")
        self.capacity = capacity
        self._entries: deque[ContextEntry] = deque(maxlen=capacity)

    def append(self, entry: ContextEntry) -> None:
        self._entries.append(entry)

    @property
    def entries(self) -> list[ContextEntry]:
        return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def render(self) -> str:
        lines = []
        for e in self._entries:
            lines.append(f"Observation: {e.observation}")
            lines.append(f"Thought: {e.thought}")
            lines.append(f"Action: {e.tool}({e.arguments})")
        return "\n".join(lines)


@dataclass(frozen=True)
class Choice:
    tool: str
    arguments: str = ""


class Policy(Protocol):
    """Stand-in for the LLM. ``think`` is called once per step, ``choose``
    once per attempt (a rejected choice is retried once)."""

    def think(self, context: SessionContext, observation: str) -> str: ...

    def choose(self, context: SessionContext, observation: str, thought: str, options: Sequence[ToolOption]) -> Choice: ...


class Environment:
    """Executes tool calls. Subclass and override :meth:`execute`.

    ``execute`` may raise :class:`EnvironmentFault`; the session records the
    fault as an ``ERROR: ...`` observation and carries on.
    """

    def __init__(self, query: str, responses: Mapping[str, str | Callable[[str], str]] | None = None):
        self.query = query
        self.responses = dict(responses or {})

    def initial_observation(self) -> str:
        return self.query

    def execute(self, tool: str, arguments: str) -> str:
        resp = self.responses.get(tool, f"{tool} returned nothing")
        return resp(arguments) if callable(resp) else resp

    def outcome(self, steps: Sequence[Step]) -> Outcome:
        return Outcome.SUCCESS


@dataclass
class SessionConfig:
    max_steps: int = DEFAULT_MAX_STEPS
    context_capacity: int = DEFAULT_CONTEXT_CAPACITY
    weight_format: WeightFormat = WeightFormat.TIMES10
    full_list: bool = False
    task_id: str = "task"

    def __post_init__(self):
        if not isinstance(self.max_steps, int) or self.max_steps < 1:
            raise ValidationError(f"max_steps must be a positive integer, got {self.max_steps!r}")
        self.weight_format = WeightFormat(self.weight_format)


@dataclass
class SessionResult:
    task_id: str
    query: str
    steps: list[Step]
    outcome: Outcome
    finished: bool
    steps_used: int
    tokens_used: int
    offered: list[list[str]] = field(default_factory=list)

    @property
    def tools(self) -> list[str]:
        return [s.tool for s in self.steps]

    @property
    def trajectory(self) -> Trajectory | None:
        """The session as a trajectory record, or ``None`` if no tool was called."""
        if not self.steps:
            return None
        return Trajectory(self.task_id, self.query, list(self.steps), self.outcome)


def _finish_option(weight: float | None, fmt: WeightFormat) -> ToolOption:
    text = None if weight is None else render_weight(weight, fmt)
    return ToolOption(FINISH, FINISH_DESCRIPTION, weight, text)


def session_options(
    g: ToolGraph, start: StartSet, previous: str | None, cfg: SessionConfig
) -> list[ToolOption]:
    """Options offered at one step.

    ``Finish`` is always on offer: where ``end`` is a visible successor it
    keeps its rank and weight, otherwise it is appended last without one.
    """
    fmt = WeightFormat.NONE if cfg.full_list else cfg.weight_format
    if cfg.full_list:
        opts = [ToolOption(n.id, n.description) for n in g.nodes if n.active]
        return opts + [_finish_option(None, fmt)]
    if previous is None:
        opts = []
        for tool in start.tools:
            w = g.weight(START, tool)
            opts.append(ToolOption(tool, g.node(tool).description, w, render_weight(w, fmt)))
        return opts + [_finish_option(None, fmt)]
    opts = []
    for tool, w in g.successors(previous):
        if tool == END:
            opts.append(_finish_option(w, fmt))
        else:
            opts.append(ToolOption(tool, g.node(tool).description, w, render_weight(w, fmt)))
    if not any(o.tool == FINISH for o in opts):
        opts.append(_finish_option(None, fmt))
    return opts


def render_prompt(query: str, context: SessionContext, observation: str, tool_text: str) -> str:
    parts = [INSTRUCTIONS, f"Task: {query}"]
    history = context.render()
    if history:
        parts.append(history)
    parts.append(f"Observation: {observation}")
    parts.append(tool_text)
    return "\n".join(parts)


def run_session(
    g: ToolGraph,
    start: StartSet,
    env: Environment,
    policy: Policy,
    cfg: SessionConfig | None = None,
) -> SessionResult:
    cfg = cfg if cfg is not None else SessionConfig()
    if not cfg.full_list and len(start) == 0:
        raise ValidationError("start set is empty")
    if FINISH in g:
        raise ValidationError(f"a tool may not be called {FINISH!r}: the name is taken by the end node")

    query = env.initial_observation()
    observation = query
    context = SessionContext(cfg.context_capacity)
    fmt = WeightFormat.NONE if cfg.full_list else cfg.weight_format
    steps: list[Step] = []
    offered: list[list[str]] = []
    tokens = 0
    previous = None
    finished = False
    steps_used = 0
    outcome = Outcome.GAVE_UP

    for _ in range(cfg.max_steps):
        options = session_options(g, start, previous, cfg)
        offered.append([o.tool for o in options])
        names = {o.tool for o in options}
        prompt = render_prompt(query, context, observation, format_tool_context(options, fmt))
        thought = policy.think(context, observation)
        tokens += count_tokens(thought)
        choice = None
        for _attempt in range(2):
            candidate = policy.choose(context, observation, thought, options)
            tokens += count_tokens(prompt) + count_tokens(f"{candidate.tool} {candidate.arguments}")
            if candidate.tool in names:
                choice = candidate
                break
        if choice is None:
            # the state change is irreversible: a second bad choice ends the session
            outcome = Outcome.FAILURE
            break
        steps_used += 1
        if choice.tool == FINISH:
            finished = True
            outcome = env.outcome(steps)
            break
        try:
            result = env.execute(choice.tool, choice.arguments)
        except EnvironmentFault as exc:
            result = f"ERROR: {exc}"
        context.append(ContextEntry(observation, thought, choice.tool, choice.arguments))
        steps.append(Step(choice.tool, thought, choice.arguments, result))
        observation = result
        previous = choice.tool

    return SessionResult(cfg.task_id, query, steps, Outcome(outcome), finished, steps_used, tokens, offered)


# -- reference policies ----------------------------------------------------


class ScriptedPolicy:
    """Follows a fixed script, one entry per step.

    An entry is a tool id, or a list of candidate ids of which the
    highest-ranked offered one is taken. When no candidate is offered, or the
    script runs out, the policy finishes.
    """

    def __init__(self, script: Sequence[str | Sequence[str]]):
        self.script = [e if isinstance(e, str) else tuple(e) for e in script]
        self._cursor = -1

    def think(self, context, observation):
        self._cursor += 1
        entry = self._entry()
        if entry is None:
            return "I have what I need."
        return f"Next I should call {entry if isinstance(entry, str) else ' or '.join(entry)}."

    def _entry(self):
        if 0 <= self._cursor < len(self.script):
            return self.script[self._cursor]
        return None

    def choose(self, context, observation, thought, options):
        entry = self._entry()
        if entry is None:
            return Choice(FINISH)
        if isinstance(entry, str):
            return Choice(entry)
        offered = [o.tool for o in options]
        for tool in offered:
            if tool in entry:
                return Choice(tool)
        return Choice(FINISH)


class GreedyPolicy:
    """Takes the top-ranked tool; optionally finishes once it sees an answer."""

    def __init__(self, finish_on_answer: bool = False, answer_prefix: str = "Answer:"):
        self.finish_on_answer = finish_on_answer
        self.answer_prefix = answer_prefix

    def think(self, context, observation):
        if self.finish_on_answer and observation.startswith(self.answer_prefix):
            return "The answer is in hand."
        return "The highest-ranked tool looks most promising."

    def choose(self, context, observation, thought, options):
        if self.finish_on_answer and observation.startswith(self.answer_prefix):
            return Choice(FINISH)
        return Choice(options[0].tool)


class WeightedRandomPolicy:
    """Samples a tool with probability proportional to its shown weight.

    Options without a weight (full-list mode) are sampled uniformly;
    ``Finish`` without a weight is never sampled. ``rng`` needs only a
    ``random()`` method returning floats in ``[0, 1)``.
    """

    def __init__(self, rng, finish_on_answer: bool = True, answer_prefix: str = "Answer:"):
        self.rng = rng
        self.finish_on_answer = finish_on_answer
        self.answer_prefix = answer_prefix

    def think(self, context, observation):
        if self.finish_on_answer and observation.startswith(self.answer_prefix):
            return "The answer is in hand."
        return "Pick a tool in proportion to its score."

    def choose(self, context, observation, thought, options):
        if self.finish_on_answer and observation.startswith(self.answer_prefix):
            return Choice(FINISH)
        weighted = any(o.weight is not None and o.tool != FINISH for o in options)
        pool = []
        for o in options:
            if o.tool == FINISH and o.weight is None:
                continue
            pool.append((o.tool, (o.weight or 0.0) if weighted else 1.0))
        total = sum(w for _, w in pool)
        if total <= 0.0:
            return Choice(options[0].tool)
        u = float(self.rng.random()) * total
        acc = 0.0
        for tool, w in pool:
            acc += w
            if u < acc:
                return Choice(tool)
        return Choice(pool[-1][0])
