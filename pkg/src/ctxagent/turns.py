"""Typed conversation events and their JSONL persistence.

One row per event: user messages, assistant generations (direct responses,
tool selections, tool calls), tool observations, schema injections, and
state-log updates. Assistant rows carry the token length of the prompt that
produced them — the raw data behind every context-growth figure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

USER = "user"
ASSISTANT = "assistant"
TOOL = "tool"
TRACKER = "tracker"

KIND_USER = "user"
KIND_DIRECT_RESPONSE = "direct_response"
KIND_TOOL_SELECT = "tool_select"
KIND_TOOL_CALL = "tool_call"
KIND_CLOUD_DELEGATE = "cloud_delegate"
KIND_OBSERVATION = "observation"
KIND_SCHEMA_INJECTION = "schema_injection"
KIND_CSO_UPDATE = "cso_update"

ASSISTANT_KINDS = (KIND_DIRECT_RESPONSE, KIND_TOOL_SELECT, KIND_TOOL_CALL, KIND_CLOUD_DELEGATE)


@dataclass
class Turn:
    session_id: str
    turn_index: int
    role: str
    kind: str
    content: str
    input_context_tokens: int | None = None
    assistant_turn: int | None = None
    tool_name: str | None = None
    arguments: dict[str, Any] | None = None
    success: bool | None = None
    malformed: bool = False
    diagnostic: str | None = None

    def to_json(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "sessionId": self.session_id,
            "turnIndex": self.turn_index,
            "role": self.role,
            "kind": self.kind,
            "content": self.content,
            "inputContextTokens": self.input_context_tokens,
        }
        if self.assistant_turn is not None:
            row["assistantTurn"] = self.assistant_turn
        if self.tool_name is not None:
            row["toolName"] = self.tool_name
        if self.arguments is not None:
            row["arguments"] = self.arguments
        if self.success is not None:
            row["success"] = self.success
        if self.malformed:
            row["malformed"] = True
        if self.diagnostic is not None:
            row["diagnostic"] = self.diagnostic
        return row

    @classmethod
    def from_json(cls, row: dict[str, Any]) -> "Turn":
        return cls(
            session_id=row["sessionId"],
            turn_index=row["turnIndex"],
            role=row["role"],
            kind=row["kind"],
            content=row["content"],
            input_context_tokens=row.get("inputContextTokens"),
            assistant_turn=row.get("assistantTurn"),
            tool_name=row.get("toolName"),
            arguments=row.get("arguments"),
            success=row.get("success"),
            malformed=row.get("malformed", False),
            diagnostic=row.get("diagnostic"),
        )


@dataclass
class TrajectoryMeta:
    """Session header persisted as the first JSONL row (kind=session_meta)."""

    session_id: str
    mode: str
    registry_id: str
    executor_base: str = ""
    tracker_base: str = ""
    extra: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "sessionId": self.session_id,
            "kind": "session_meta",
            "mode": self.mode,
            "registryId": self.registry_id,
            "executorBase": self.executor_base,
            "trackerBase": self.tracker_base,
            "extra": self.extra,
        }

    @classmethod
    def from_json(cls, row: dict[str, Any]) -> "TrajectoryMeta":
        return cls(
            session_id=row["sessionId"],
            mode=row["mode"],
            registry_id=row["registryId"],
            executor_base=row.get("executorBase", ""),
            tracker_base=row.get("trackerBase", ""),
            extra=row.get("extra", {}),
        )


def write_trajectory(path: str | Path, meta: TrajectoryMeta, turns: Iterable[Turn]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(meta.to_json(), ensure_ascii=False) + "\n")
        for t in turns:
            f.write(json.dumps(t.to_json(), ensure_ascii=False) + "\n")


def read_trajectory(path: str | Path) -> tuple[TrajectoryMeta, list[Turn]]:
    meta: TrajectoryMeta | None = None
    turns: list[Turn] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if row.get("kind") == "session_meta":
                meta = TrajectoryMeta.from_json(row)
            else:
                turns.append(Turn.from_json(row))
    if meta is None:
        raise ValueError(f"trajectory {path} has no session_meta row")
    return meta, turns


def context_series(turns: Iterable[Turn], initial: tuple[int, int] | None = None) -> list[tuple[int, int]]:
    """(assistant turn, input-context tokens) points, optionally with a turn-0
    point for the primed base prompt."""
    series: list[tuple[int, int]] = [initial] if initial else []
    for t in turns:
        if t.role == ASSISTANT and t.assistant_turn is not None and t.input_context_tokens is not None:
            series.append((t.assistant_turn, t.input_context_tokens))
    return series
