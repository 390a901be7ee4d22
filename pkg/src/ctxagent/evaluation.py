"""Scenario runner, rule-based tool-call metrics, and suite reports.

A scenario pairs a ground-truth tool sequence with a scripted simulated user
(an ordered list of utterances) and, for deterministic runs, an embedded
backend script. The runner drives the dispatch loop, records the per-turn
input-context series, and scores the calls the agent made against the
intended sequence with multiset precision/recall/F1. Suites aggregate over
scenarios, agent modes, and repeats, and emit a JSON report, a CSV of the
context series, and one growth chart per task category.
"""

from __future__ import annotations

import csv
import json
import statistics
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .backend import Script, ScriptedBackend
from .dispatch import AgentMode, Session, SessionConfig, ToolCallRecord, parse_mode, step_turn
from .errors import BackendFailure
from .tokenizer import DEFAULT_TOKENIZER, Tokenizer
from .toolenv import ToolRegistry
from .turns import TrajectoryMeta, Turn, write_trajectory

CATEGORIES = ("multi_tool", "cloud_only", "on_device_then_cloud", "conversational", "single_tool")

DEFAULT_MAX_ASSISTANT_TURNS = 25


@dataclass
class Scenario:
    """Ground-truth task description plus the scripts that drive it."""

    id: str
    category: str
    scenario_description: str = ""
    user_persona: str = ""
    initial_user_utterance: str = ""
    intended_tool_sequence: list[Any] = field(default_factory=lambda: [""])
    constraints_and_context: dict[str, Any] = field(default_factory=dict)
    scenario_notes: str = ""
    user_script: list[str] = field(default_factory=list)
    backend_script: list[dict[str, Any]] = field(default_factory=list)
    tool_config: dict[str, dict[str, Any]] = field(default_factory=dict)

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown scenario category: {self.category!r}")
        if self.category == "conversational" and self.intended_tool_sequence != [""]:
            raise ValueError("conversational scenarios must have intended_tool_sequence ['']")

    @property
    def is_conversational(self) -> bool:
        return self.intended_tool_sequence in ([], [""])

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Scenario":
        return cls(
            id=obj["id"],
            category=obj["category"],
            scenario_description=obj.get("scenario_description", ""),
            user_persona=obj.get("user_persona", ""),
            initial_user_utterance=obj.get("initial_user_utterance", ""),
            intended_tool_sequence=obj.get("intended_tool_sequence", [""]),
            constraints_and_context=obj.get("constraints_and_context", {}),
            scenario_notes=obj.get("scenario_notes", ""),
            user_script=obj.get("user_script", []),
            backend_script=obj.get("backend_script", []),
            tool_config=obj.get("tool_config", {}),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "Scenario":
        with open(path, encoding="utf-8") as f:
            return cls.from_json(json.load(f))


def load_scenarios(directory: str | Path) -> list[Scenario]:
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise FileNotFoundError(f"no scenario files in {directory}")
    return [Scenario.from_file(p) for p in paths]


# --- metrics -----------------------------------------------------------------

@dataclass
class TrajectoryMetrics:
    precision: float
    recall: float
    f1: float
    made_calls: list[str | None]
    matched_calls: list[str]
    context_series: list[tuple[int, int]] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "madeCalls": self.made_calls,
            "matchedCalls": self.matched_calls,
            "contextSeries": [list(p) for p in self.context_series],
        }


def _truth_id(entry: Any) -> str:
    return entry["id"] if isinstance(entry, dict) else entry


def _strict_compatible(record: ToolCallRecord, truth_entry: Any) -> bool:
    tid = record.matchable_id
    if tid is None or tid != _truth_id(truth_entry):
        return False
    if isinstance(truth_entry, dict):
        want = truth_entry.get("args", {})
        have = record.arguments or {}
        return all(k in have and have[k] == v for k, v in want.items())
    return True


def _max_matching(made: Sequence[ToolCallRecord], truth: Sequence[Any]) -> list[int | None]:
    """Maximum bipartite matching made->truth; returns the truth index each
    made call is assigned to (None when unmatched). Sizes here are tiny, so
    plain augmenting-path search is plenty."""
    assigned_truth: dict[int, int] = {}

    def try_assign(i: int, seen: set[int]) -> bool:
        for j, entry in enumerate(truth):
            if j in seen or not _strict_compatible(made[i], entry):
                continue
            seen.add(j)
            if j not in assigned_truth or try_assign(assigned_truth[j], seen):
                assigned_truth[j] = i
                return True
        return False

    for i in range(len(made)):
        try_assign(i, set())
    assignment: list[int | None] = [None] * len(made)
    for j, i in assigned_truth.items():
        assignment[i] = j
    return assignment


def compute_metrics(
    made: Sequence[ToolCallRecord],
    truth: Sequence[Any],
    strict_args: bool = False,
    context_series: Iterable[tuple[int, int]] = (),
) -> TrajectoryMetrics:
    """Multiset precision/recall/F1 of made calls against the intended sequence.

    Order is ignored; duplicates match at most once each. Malformed and
    unknown calls count toward the made total but never match. An intended
    sequence of [""] marks a conversational task: perfect iff no calls made.
    """
    series = list(context_series)
    made_ids = [r.matchable_id for r in made]
    truth_ids = [t for t in (_truth_id(e) for e in truth) if t]

    if not truth_ids:
        score = 1.0 if not made else 0.0
        return TrajectoryMetrics(score, score, score, made_ids, [], series)

    if strict_args:
        assignment = _max_matching(made, truth)
        matched = [made_ids[i] for i, j in enumerate(assignment) if j is not None]
    else:
        remaining = Counter(truth_ids)
        matched = []
        for mid in made_ids:
            if mid and remaining[mid] > 0:
                remaining[mid] -= 1
                matched.append(mid)

    precision = len(matched) / len(made) if made else 0.0
    recall = len(matched) / len(truth_ids)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return TrajectoryMetrics(precision, recall, f1, made_ids, matched, series)


# --- scenario runner ---------------------------------------------------------

@dataclass
class Trajectory:
    scenario_id: str
    mode: str
    session_id: str
    category: str
    turns: list[Turn]
    context_series: list[tuple[int, int]]
    failed: bool = False
    failure_reason: str | None = None

    def meta(self, registry_id: str) -> TrajectoryMeta:
        return TrajectoryMeta(
            session_id=self.session_id,
            mode=self.mode,
            registry_id=registry_id,
            extra={"scenarioId": self.scenario_id, "category": self.category},
        )


def run_scenario(
    scenario: Scenario,
    mode: AgentMode | str,
    registry: ToolRegistry,
    seed: int = 0,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    max_assistant_turns: int = DEFAULT_MAX_ASSISTANT_TURNS,
    strict_args: bool = False,
    backend=None,
) -> tuple[Trajectory, TrajectoryMetrics]:
    """Run one scenario in one mode with a fresh scripted backend.

    A backend script running dry (or any backend failure) marks the
    trajectory failed rather than raising; metrics are still computed over
    whatever happened up to that point.
    """
    if isinstance(mode, str):
        mode = parse_mode(mode)
    if scenario.tool_config:
        registry = registry.with_config(scenario.tool_config)
    if backend is None:
        backend = ScriptedBackend(Script.from_json(scenario.backend_script), tokenizer=tokenizer)
    session = Session(
        session_id=f"{scenario.id}.{mode.name}.r{seed}",
        mode=mode,
        registry=registry,
        backend=backend,
        tokenizer=tokenizer,
        config=SessionConfig(seed=seed),
    )
    failure: str | None = None
    try:
        for utterance in [scenario.initial_user_utterance] + list(scenario.user_script):
            if session.assistant_turns >= max_assistant_turns:
                break
            step_turn(session, utterance)
    except BackendFailure as e:
        failure = f"{type(e).__name__}: {e}"
    trajectory = Trajectory(
        scenario_id=scenario.id,
        mode=mode.name,
        session_id=session.id,
        category=scenario.category,
        turns=list(session.turns),
        context_series=list(session.context_series),
        failed=failure is not None,
        failure_reason=failure,
    )
    metrics = compute_metrics(
        session.made_calls,
        scenario.intended_tool_sequence,
        strict_args=strict_args,
        context_series=session.context_series,
    )
    return trajectory, metrics


def growth_slope(series: Sequence[tuple[int, int]]) -> float:
    """Least-squares slope of input-context tokens versus assistant turn."""
    if len(series) < 2:
        return 0.0
    xs = [float(p[0]) for p in series]
    ys = [float(p[1]) for p in series]
    if len(set(xs)) < 2:
        return 0.0
    return statistics.linear_regression(xs, ys).slope


# --- suites ------------------------------------------------------------------

@dataclass
class SuiteReport:
    modes: list[str]
    repeats: int
    categories: dict[str, dict[str, Any]]
    scenarios: list[dict[str, Any]]
    tokenizer_name: str

    def to_json(self) -> dict[str, Any]:
        return {
            "modes": self.modes,
            "repeats": self.repeats,
            "tokenizer": self.tokenizer_name,
            "categories": self.categories,
            "scenarios": self.scenarios,
        }

    def category_mode(self, category: str, mode: str) -> dict[str, Any]:
        return self.categories[category][mode]


def _mean_series(series_list: list[list[tuple[int, int]]]) -> dict[int, float]:
    by_turn: dict[int, list[int]] = {}
    for series in series_list:
        for turn, tokens in series:
            by_turn.setdefault(turn, []).append(tokens)
    return {t: statistics.fmean(v) for t, v in sorted(by_turn.items())}


def run_suite(
    scenarios: Sequence[Scenario],
    modes: Sequence[AgentMode | str],
    repeats: int = 1,
    registry: ToolRegistry | None = None,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
    max_assistant_turns: int = DEFAULT_MAX_ASSISTANT_TURNS,
    out_dir: str | Path | None = None,
) -> SuiteReport:
    """Run every (scenario, mode) pair ``repeats`` times and aggregate.

    Per category and mode: mean precision/recall/F1 with per-run values, the
    mean context series with 95% CI half-widths over repeats, and the mean
    least-squares growth slope. Writes report.json, series.csv and one chart
    per category when ``out_dir`` is given.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if registry is None:
        from .fixtures import fixture_registry

        registry = fixture_registry()
    modes = [parse_mode(m) if isinstance(m, str) else m for m in modes]

    runs: list[dict[str, Any]] = []
    trajectories: list[Trajectory] = []
    for scenario in scenarios:
        for mode in modes:
            for rep in range(repeats):
                trajectory, metrics = run_scenario(
                    scenario,
                    mode,
                    registry,
                    seed=rep,
                    tokenizer=tokenizer,
                    max_assistant_turns=max_assistant_turns,
                )
                trajectories.append(trajectory)
                runs.append(
                    {
                        "scenario": scenario.id,
                        "category": scenario.category,
                        "mode": mode.name,
                        "repeat": rep,
                        "metrics": metrics,
                        "trajectory": trajectory,
                    }
                )

    categories: dict[str, dict[str, Any]] = {}
    for category in sorted({r["category"] for r in runs}):
        categories[category] = {}
        for mode in modes:
            rows = [r for r in runs if r["category"] == category and r["mode"] == mode.name]
            if not rows:
                continue
            per_repeat_series = []
            for rep in range(repeats):
                rep_rows = [r for r in rows if r["repeat"] == rep]
                per_repeat_series.append(_mean_series([r["metrics"].context_series for r in rep_rows]))
            turns_axis = sorted(set().union(*[s.keys() for s in per_repeat_series]))
            mean_series, ci95 = [], []
            for t in turns_axis:
                values = [s[t] for s in per_repeat_series if t in s]
                mean_series.append(statistics.fmean(values))
                if repeats >= 2 and len(values) >= 2:
                    half = 1.96 * statistics.stdev(values) / (len(values) ** 0.5)
                    ci95.append(half)
                else:
                    ci95.append(None)
            slopes = [growth_slope(r["metrics"].context_series) for r in rows]
            finals = [r["metrics"].context_series[-1][1] for r in rows if r["metrics"].context_series]
            initials = [r["metrics"].context_series[0][1] for r in rows if r["metrics"].context_series]
            summary = {
                "runs": len(rows),
                "failed_runs": sum(1 for r in rows if r["trajectory"].failed),
                "slope": {"mean": statistics.fmean(slopes), "runs": slopes},
                "initial_context": statistics.fmean(initials) if initials else None,
                "final_context": statistics.fmean(finals) if finals else None,
                "context_series": {
                    "turns": turns_axis,
                    "mean": mean_series,
                    "ci95_halfwidth": ci95 if repeats >= 2 else None,
                },
            }
            for metric in ("precision", "recall", "f1"):
                values = [getattr(r["metrics"], metric) for r in rows]
                summary[metric] = {"mean": statistics.fmean(values), "runs": values}
            categories[category][mode.name] = summary

    scenario_rows = [
        {
            "scenario": r["scenario"],
            "category": r["category"],
            "mode": r["mode"],
            "repeat": r["repeat"],
            "precision": r["metrics"].precision,
            "recall": r["metrics"].recall,
            "f1": r["metrics"].f1,
            "failed": r["trajectory"].failed,
        }
        for r in runs
    ]
    report = SuiteReport(
        modes=[m.name for m in modes],
        repeats=repeats,
        categories=categories,
        scenarios=scenario_rows,
        tokenizer_name=getattr(tokenizer, "name", "custom"),
    )
    if out_dir is not None:
        write_report(report, runs, trajectories, registry.id, Path(out_dir))
    return report


def write_report(
    report: SuiteReport,
    runs: list[dict[str, Any]],
    trajectories: list[Trajectory],
    registry_id: str,
    out_dir: Path,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w", encoding="utf-8") as f:
        json.dump(report.to_json(), f, indent=2)
        f.write("\n")

    with open(out_dir / "series.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["category", "mode", "repeat", "scenario", "assistant_turn", "input_context_tokens"])
        for r in runs:
            for turn, tokens in r["metrics"].context_series:
                writer.writerow([r["category"], r["mode"], r["repeat"], r["scenario"], turn, tokens])

    traj_dir = out_dir / "trajectories"
    traj_dir.mkdir(exist_ok=True)
    for trajectory in trajectories:
        path = traj_dir / f"{trajectory.session_id}.jsonl"
        write_trajectory(path, trajectory.meta(registry_id), trajectory.turns)

    charts_dir = out_dir / "charts"
    charts_dir.mkdir(exist_ok=True)
    for category, by_mode in report.categories.items():
        _plot_category(category, by_mode, charts_dir)


def _plot_category(category: str, by_mode: dict[str, Any], charts_dir: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.2))
    for mode, summary in by_mode.items():
        series = summary["context_series"]
        turns, means = series["turns"], series["mean"]
        ax.plot(turns, means, marker="o", markersize=2.5, label=mode)
        ci = series.get("ci95_halfwidth")
        if ci and any(h for h in ci):
            lo = [m - (h or 0) for m, h in zip(means, ci)]
            hi = [m + (h or 0) for m, h in zip(means, ci)]
            ax.fill_between(turns, lo, hi, alpha=0.2)
    ax.set_xlabel("Assistant turn")
    ax.set_ylabel("Input context tokens")
    ax.set_title(f"Context growth: {category}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(charts_dir / f"{category}.svg")
    fig.savefig(charts_dir / f"{category}.png", dpi=120)
    plt.close(fig)
