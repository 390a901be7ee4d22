"""Bundled fixtures: tool registries, scripted flows, and growth suites.

The Wi-Fi ticket walkthrough is the runtime's reference flow: its base
prompts are padded to fixed token counts (1710 executor / 206 tracker) so
the cache-ledger arithmetic is checkable as exact integers, and its scripted
deltas commit +15 and +14 tokens. The growth-suite builders generate
deterministic multi-turn scenarios (with matching backend scripts) used to
measure context-growth slopes across agent modes.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..backend import Script, ScriptedBackend
from ..dispatch import MODES, SessionConfig, build_executor_base
from ..memory import tracker_base_prompt
from ..tokenizer import DEFAULT_TOKENIZER, Tokenizer
from ..toolenv import ToolRegistry, load_registry

FIXTURES_DIR = Path(__file__).parent

EXECUTOR_PRIME_TOKENS = 1710
TRACKER_PRIME_TOKENS = 206

# Raw tracker outputs for the walkthrough; with the leading newline separator
# added at commit time these measure exactly 15 and 14 tokens.
WIFI_DELTA_1 = "user_goal: create_it_ticket_for_wifi"
WIFI_DELTA_2 = "ticket_id: IT7390\nstatus: ticket_created"


def fixture_registry() -> ToolRegistry:
    """The 19-tool on-device registry used by budgets and eval suites."""
    return load_registry(FIXTURES_DIR / "registry.json")


def it_support_registry() -> ToolRegistry:
    """Small 5-tool registry used by the walkthrough fixture."""
    return load_registry(FIXTURES_DIR / "registry_it_support.json")


def scenario_dir() -> Path:
    return FIXTURES_DIR / "scenarios"


def pad_to_tokens(text: str, target: int, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> str:
    """Append filler so the text measures exactly ``target`` tokens.

    Filler is a newline plus " pad" words (2 tokens each) and trailing dots
    (1 token each); none of it can merge with the existing text.
    """
    current = tokenizer.count_tokens(text)
    if current > target:
        raise ValueError(f"text already measures {current} tokens, above target {target}")
    need = target - current
    if need == 0:
        return text
    words, dots = divmod(need - 1, 2)
    return text + "\n" + " pad" * words + "." * dots


def wifi_ticket_config(tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> SessionConfig:
    """Session config for the walkthrough: prompts padded to 1710/206 tokens."""
    registry = it_support_registry()
    executor_base = pad_to_tokens(
        build_executor_base(MODES["mem"], registry), EXECUTOR_PRIME_TOKENS, tokenizer
    )
    tracker_base = pad_to_tokens(tracker_base_prompt(), TRACKER_PRIME_TOKENS, tokenizer)
    return SessionConfig(
        executor_base_override=executor_base,
        tracker_base_override=tracker_base,
    )


def wifi_ticket_script() -> Script:
    return Script.from_file(FIXTURES_DIR / "scripts" / "wifi_ticket.json")


def wifi_ticket_backend(tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> ScriptedBackend:
    return ScriptedBackend(wifi_ticket_script(), tokenizer=tokenizer)


# --- growth suites -----------------------------------------------------------

def _tool_call(name: str, arguments: dict) -> str:
    return "<tool_call>" + json.dumps({"name": name, "arguments": arguments}, ensure_ascii=False) + "</tool_call>"


def build_growth_suite(
    kind: str,
    n_scenarios: int = 10,
    n_user_turns: int = 20,
    cloud_tokens: int = 400,
):
    """Deterministic scenario/script pairs for context-growth measurement.

    ``kind`` is "multi_tool" (on-device calls with moderately verbose
    observations) or "cloud" (every turn delegates and receives a
    ``cloud_tokens``-token response). Scripts match on unique per-turn
    markers in the user utterances, so they drive identical decision
    sequences in every agent mode.
    """
    from ..evaluation import Scenario  # local import; evaluation builds on dispatch

    if kind not in ("multi_tool", "cloud"):
        raise ValueError(f"unknown growth suite kind: {kind!r}")
    scenarios = []
    for i in range(n_scenarios):
        marker = f"job{i}"
        utterances = [
            f"[{marker} step{j}] Please handle the next step of task {marker}." for j in range(n_user_turns)
        ]
        steps = []
        for j, utterance in enumerate(utterances):
            step_marker = f"{marker} step{j}"
            if kind == "cloud":
                call = _tool_call(
                    "process_with_cloud_llm",
                    {
                        "user_query_context": f"{step_marker} needs research",
                        "reason_for_escalation": "requires broad knowledge",
                    },
                )
            else:
                call = _tool_call(
                    "manage_notes_and_lists",
                    {"action": "append", "note_title": marker, "content": f"progress at {step_marker}"},
                )
            steps.append({"channel": "executor", "contains": step_marker, "output": call})
            steps.append({
                "channel": "executor",
                "contains": step_marker,
                "output": f"Done with step {j} of {marker}.",
            })
            steps.append({"channel": "tracker", "output": f"completed_steps: {marker}_s{j}"})
            steps.append({"channel": "tracker", "output": "# NO_UPDATE"})
        if kind == "cloud":
            intended = ["process_with_cloud_llm"]
        else:
            intended = ["manage_notes_and_lists"] * n_user_turns
        scenarios.append(
            Scenario(
                id=f"growth_{kind}_{i}",
                category="cloud_only" if kind == "cloud" else "multi_tool",
                scenario_description=f"Scripted {n_user_turns}-turn growth probe ({kind}).",
                user_persona="Methodical user working through a long task.",
                initial_user_utterance=utterances[0],
                intended_tool_sequence=intended,
                user_script=utterances[1:],
                backend_script=steps,
                tool_config={
                    "process_with_cloud_llm": {"target_tokens": cloud_tokens},
                    "manage_notes_and_lists": {"detail_tokens": 64},
                },
            )
        )
    return scenarios
