"""Regenerate the golden files. Run only after an intended format change:

    python3 tests/make_golden.py
"""
from pathlib import Path

from toolnet.construction import EvaluatorReport, ScoreEntry, apply_evaluation
from toolnet.dot import to_dot
from toolnet.graph import ToolNode, UpdateParams, new_graph
from toolnet.simulation import ScenarioSpec, run_scenario

HERE = Path(__file__).resolve().parent
GOLDEN = HERE / "golden"
SCENARIOS = HERE.parent / "scenarios"


def golden_graph():
    return new_graph(
        [ToolNode("Search", "search the web", "web"), ToolNode("Calc", "evaluate arithmetic", "math"), ToolNode("Notes")],
        UpdateParams(0.5, 0.3),
    )


def golden_report():
    return EvaluatorReport("g-1", [ScoreEntry("Search", 2, "found it"), ScoreEntry("Notes", -1, "noise")])


def build() -> dict[str, str]:
    g = golden_graph()
    files = {"uniform.json": g.dumps(), "uniform.dot": to_dot(g)}
    apply_evaluation(g, golden_report())
    files["updated.json"] = g.dumps()
    files["updated.dot"] = to_dot(g)
    files["noisy_trace.csv"] = run_scenario(ScenarioSpec.load(SCENARIOS / "noisy_tools.json")).trace.to_csv()
    return files


if __name__ == "__main__":
    GOLDEN.mkdir(exist_ok=True)
    for name, text in build().items():
        (GOLDEN / name).write_text(text, encoding="utf-8")
        print(f"wrote {name}")
