"""Weighted tool-transition graphs for tool-augmented agents.

Build a graph from trajectories (bigram counts) or start uniform, refine it
online from evaluator scores, restrict each agent step to the successors of
the previous tool, and replay whole scenarios deterministically.
"""
from .construction import (
    EvaluatorReport,
    OracleRubric,
    Outcome,
    ScoreEntry,
    Step,
    Trajectory,
    apply_evaluation,
    evaluate_trajectory_oracle,
    f_map,
    read_trajectories,
    static_construct,
    write_trajectories,
)
from .dot import to_dot
from .errors import *  # noqa: F401,F403
from .graph import END, START, Edge, ToolGraph, ToolNode, UpdateParams, new_graph
from .kernels import BACKEND
from .navigation import (
    Choice,
    Environment,
    SessionConfig,
    SessionContext,
    SessionResult,
    ToolOption,
    WeightFormat,
    count_tokens,
    format_tool_context,
    run_session,
)
from .retrieval import StartSet, TfidfEmbedder, select_start_set, tfidf_embed
from .simulation import (
    ScenarioSpec,
    analyze_corpus,
    compare_token_usage,
    run_scenario,
)

__version__ = "0.1.0"
