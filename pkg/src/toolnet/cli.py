"""Command-line interface.

Settings resolve as flag, then ``TOOLNET_*`` environment variable, then
default. Exit codes: 0 success, 1 I/O error, 2 invalid input, 3 a scenario
assertion failed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .construction import EvaluatorReport, apply_evaluation, read_trajectories, static_construct
from .dot import to_dot
from .errors import ValidationError
from .graph import END, START, ToolGraph, UpdateParams, new_graph
from .navigation import FINISH, FINISH_DESCRIPTION, ToolOption, WeightFormat, format_tool_context, render_weight
from .retrieval import DEFAULT_K_RETRIEVAL, load_registry, provider_for, select_start_set
from .simulation import Mode, ScenarioSpec, analyze_corpus, check_assertions, compare_token_usage, run_scenario

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_ASSERTION = 0, 1, 2, 3

_DEFAULTS = {
    "alpha": UpdateParams.alpha,
    "beta": UpdateParams.beta,
    "k": DEFAULT_K_RETRIEVAL,
    "seed": None,
    "weight_format": WeightFormat.TIMES10.value,
}


def _env_or(flag, env_name: str, key: str, parse):
    if flag is not None:
        raw, source = flag, "flag"
    elif os.environ.get(env_name) not in (None, ""):
        raw, source = os.environ[env_name], f"${env_name}"
    else:
        return _DEFAULTS[key], False
    try:
        return parse(raw), True
    except (TypeError, ValueError):
        raise ValidationError(f"invalid {key} from {source}: {raw!r}") from None


def _params(args) -> UpdateParams:
    alpha, _ = _env_or(args.alpha, "TOOLNET_ALPHA", "alpha", float)
    beta, _ = _env_or(args.beta, "TOOLNET_BETA", "beta", float)
    return UpdateParams(alpha, beta)


def _positive_int(raw) -> int:
    v = int(raw)
    if v < 1:
        raise ValueError(raw)
    return v


def _seed(raw) -> int:
    v = int(raw)
    if not 0 <= v < 2**64:
        raise ValueError(raw)
    return v


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_build(args) -> int:
    params = _params(args)
    tools = load_registry(args.registry)
    if args.no_corpus:
        g = new_graph(tools, params)
    else:
        if not args.corpus:
            raise ValidationError("build needs --corpus or --no-corpus")
        g = static_construct(tools, read_trajectories(args.corpus), success_only=not args.all_outcomes, params=params)
    _emit(g.dumps(), args.out)
    return EXIT_OK


def cmd_update(args) -> int:
    alpha, alpha_given = _env_or(args.alpha, "TOOLNET_ALPHA", "alpha", float)
    beta, beta_given = _env_or(args.beta, "TOOLNET_BETA", "beta", float)
    g = ToolGraph.load(args.graph)
    report = EvaluatorReport.load(args.report)
    if alpha_given or beta_given:
        g.params = UpdateParams(alpha if alpha_given else g.params.alpha, beta if beta_given else g.params.beta)
    apply_evaluation(g, report)
    _emit(g.dumps(), args.out)
    return EXIT_OK


def cmd_successors(args) -> int:
    fmt, _ = _env_or(args.format, "TOOLNET_WEIGHT_FORMAT", "weight_format", WeightFormat)
    fmt = WeightFormat(fmt)
    g = ToolGraph.load(args.graph)
    if args.source == START and args.query is not None:
        k, _ = _env_or(args.k, "TOOLNET_K", "k", _positive_int)
        start = select_start_set(g, provider_for(g), args.query, k)
        pairs = [(t, g.weight(START, t)) for t in start.tools]
    else:
        pairs = g.successors(args.source)
    options = []
    for tool, w in pairs:
        if tool == END:
            options.append(ToolOption(FINISH, FINISH_DESCRIPTION, w, render_weight(w, fmt)))
        else:
            options.append(ToolOption(tool, g.node(tool).description, w, render_weight(w, fmt)))
    _emit(format_tool_context(options, fmt) + "\n", None)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = ScenarioSpec.load(args.scenario)
    seed, given = _env_or(args.seed, "TOOLNET_SEED", "seed", _seed)
    if given:
        spec = replace(spec, seed=seed)
    for key, env, parse in (("alpha", "TOOLNET_ALPHA", float), ("beta", "TOOLNET_BETA", float)):
        value, given = _env_or(getattr(args, key), env, key, parse)
        if given:
            spec = replace(spec, **{key: value})
    fmt, given = _env_or(args.format, "TOOLNET_WEIGHT_FORMAT", "weight_format", WeightFormat)
    if given:
        spec = replace(spec, weight_format=fmt)
    if args.mode:
        spec = replace(spec, mode=Mode(args.mode))

    result = run_scenario(spec)
    summary = result.summary()
    if args.compare:
        other = replace(spec, mode=Mode.FULL_LIST if spec.mode is Mode.TOOLNET else Mode.TOOLNET)
        summary["token_comparison"] = compare_token_usage((spec, other)).to_dict()
    checks = check_assertions(spec, result)
    summary["assertions"] = [{"assertion": a, "passed": ok, "detail": d} for a, ok, d in checks]

    if args.trace:
        Path(args.trace).write_text(result.trace.to_csv(), encoding="utf-8")
    if args.graph_out:
        result.graph_final.save(args.graph_out)
    text = json.dumps(summary, sort_keys=True, indent=2) + "\n"
    if args.trace:
        sys.stdout.write(text)
    else:
        sys.stdout.write(result.trace.to_csv())
        sys.stderr.write(text)
    failed = [a for a, ok, _ in checks if not ok]
    for a in failed:
        print(f"assertion failed: {json.dumps(a, sort_keys=True)}", file=sys.stderr)
    return EXIT_ASSERTION if failed else EXIT_OK


def cmd_stats(args) -> int:
    report = analyze_corpus(read_trajectories(args.corpus), top_n=args.top)
    _emit(report.dumps(), args.out)
    return EXIT_OK


def cmd_export_dot(args) -> int:
    if not 0.0 <= args.min_weight <= 1.0:
        raise ValidationError("--min-weight must lie in [0, 1]")
    _emit(to_dot(ToolGraph.load(args.graph), args.min_weight), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toolnet", description="Build, update and query weighted tool graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_params(p):
        p.add_argument("--alpha", type=str, default=None, help="update speed (env TOOLNET_ALPHA, default 0.5)")
        p.add_argument("--beta", type=str, default=None, help="prior share (env TOOLNET_BETA, default 0.3)")

    formats = [f.value for f in WeightFormat]

    p = sub.add_parser("build", help="build a graph from a registry and a trajectory corpus")
    p.add_argument("--registry", required=True)
    p.add_argument("--corpus")
    p.add_argument("--no-corpus", action="store_true", help="uniform, fully connected graph")
    p.add_argument("--all-outcomes", action="store_true", help="count failed trajectories too")
    p.add_argument("--out")
    add_params(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("update", help="apply one evaluator report")
    p.add_argument("--graph", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--out")
    add_params(p)
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("successors", help="list the tools offered after a node")
    p.add_argument("--graph", required=True)
    p.add_argument("--from", dest="source", required=True)
    p.add_argument("--format", default=None, help=f"one of {formats} (env TOOLNET_WEIGHT_FORMAT)")
    p.add_argument("--query", help="with --from start: rank tools against this query")
    p.add_argument("--k", default=None, help="start-set size (env TOOLNET_K, default 8)")
    p.set_defaults(func=cmd_successors)

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("scenario")
    p.add_argument("--trace", help="trace CSV path (default: stdout, summary to stderr)")
    p.add_argument("--graph-out")
    p.add_argument("--seed", default=None)
    p.add_argument("--format", default=None)
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--compare", action="store_true", help="also run the other mode and compare tokens")
    add_params(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="sparsity statistics of a trajectory corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("export-dot", help="render a graph as Graphviz DOT")
    p.add_argument("--graph", required=True)
    p.add_argument("--min-weight", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"toolnet: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"toolnet: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
