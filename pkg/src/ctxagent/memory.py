"""Append-only conversation state log and the per-turn update cycle.

The log replaces raw conversation history as the agent's working memory: a
semi-structured text checklist that only ever grows. After each assistant
generation, a separate state-tracker channel is prompted with the current
log plus the newest messages and emits just the lines to append (or an
explicit no-update sentinel). Text of version v is always a byte prefix of
version v+1 — that property is what lets the cache ledger treat the log as
an extend-only prompt prefix.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import EmptyOutput, NonMonotoneTurn

PRIMING_LINE = "# This is the start of the conversation."
NO_UPDATE_SENTINEL = "# NO_UPDATE"

_KEYED_LINE = re.compile(r"^([a-z_]+): (.*)$")


@dataclass(frozen=True)
class StateEntry:
    """One appended line; key/value populated only for 'key: value' lines."""

    raw_line: str
    turn_index: int
    key: str | None = None
    value: str | None = None

    @classmethod
    def from_line(cls, line: str, turn_index: int) -> "StateEntry":
        m = _KEYED_LINE.match(line)
        if m:
            return cls(raw_line=line, turn_index=turn_index, key=m.group(1), value=m.group(2))
        return cls(raw_line=line, turn_index=turn_index)


@dataclass(frozen=True)
class StateDelta:
    """Lines to append after one assistant generation (possibly none)."""

    lines: tuple[str, ...] = ()
    is_no_update: bool = False

    def __post_init__(self):
        if self.is_no_update and self.lines:
            raise ValueError("no-update delta cannot carry lines")
        if any(line.strip() == NO_UPDATE_SENTINEL for line in self.lines):
            raise ValueError("delta lines must not contain the no-update sentinel")

    @property
    def is_empty(self) -> bool:
        return not self.lines

    def rendered(self) -> str:
        """Text committed to the cache ledger: newline separator + lines."""
        return "" if self.is_empty else "\n" + "\n".join(self.lines)


@dataclass(frozen=True)
class ContextState:
    """Immutable snapshot of the append-only state log."""

    entries: tuple[StateEntry, ...] = ()
    version: int = 0

    @property
    def text(self) -> str:
        return "\n".join([PRIMING_LINE] + [e.raw_line for e in self.entries])

    @property
    def lines(self) -> list[str]:
        return [e.raw_line for e in self.entries]

    def last_turn_index(self) -> int:
        return self.entries[-1].turn_index if self.entries else -1


def apply_delta(state: ContextState, delta: StateDelta, turn_index: int) -> ContextState:
    """Append a delta, returning the next version (or the same state for no-ops)."""
    if delta.is_no_update or delta.is_empty:
        return state
    if turn_index <= state.last_turn_index():
        raise NonMonotoneTurn(
            f"turn index {turn_index} not greater than latest entry turn {state.last_turn_index()}"
        )
    new_entries = state.entries + tuple(StateEntry.from_line(line, turn_index) for line in delta.lines)
    return ContextState(entries=new_entries, version=state.version + 1)


def parse_tracker_output(raw: str, current: ContextState | None = None) -> StateDelta:
    """Parse a verbatim state-tracker completion into a delta.

    Whitespace-only output is an error (a misbehaving backend), distinct from
    the explicit sentinel. Lines that duplicate an existing log line verbatim
    are dropped so a repetitive backend cannot bloat the permanent context.
    """
    trimmed = raw.strip()
    if not trimmed:
        raise EmptyOutput("tracker backend returned whitespace-only output")
    if trimmed == NO_UPDATE_SENTINEL:
        return StateDelta(is_no_update=True)
    existing = set(current.lines) if current is not None else set()
    lines = []
    for line in trimmed.split("\n"):
        line = line.rstrip()
        if not line.strip():
            continue
        if line.strip() == NO_UPDATE_SENTINEL:
            continue
        if line in existing:
            continue
        lines.append(line)
    return StateDelta(lines=tuple(lines))


# Prompt scaffolding for the tracker channel. The permanent region of the
# tracker cache is the system contract plus the checklist header plus the
# current log text; everything after (new messages, generation cue) is
# ephemeral and rewound every cycle.

TRACKER_CONTRACT = (
    "You are an expert AI assistant that analyzes new conversation turns and "
    "generates a concise, append-only log entry. Output ONLY the new lines to "
    "append to the checklist; never repeat existing lines. Use single-word "
    "keys (e.g. user_goal), log core facts, completed steps, and unresolved "
    f"tool errors. If there is nothing to append, output exactly: {NO_UPDATE_SENTINEL}"
)


def tracker_base_prompt(contract: str = TRACKER_CONTRACT) -> str:
    return (
        "<|im_start|>system\n"
        + contract
        + "\n<|im_end|>\n<|im_start|>user\n[PREVIOUS CHECKLIST]\n"
        + PRIMING_LINE
    )


def render_exchange(turns) -> str:
    """Render the newest user/assistant/tool messages for the tracker prompt."""
    role_names = {"user": "USER", "assistant": "ASSISTANT", "tool": "TOOL"}
    lines = []
    for t in turns:
        label = role_names.get(t.role, t.role.upper())
        lines.append(f"{label}: {t.content}")
    return "\n".join(lines)


def tracker_ephemeral_text(exchange_turns) -> str:
    return (
        "\n[NEW MESSAGES]\n"
        + render_exchange(exchange_turns)
        + "\n[NEW LINES TO APPEND]\n<|im_end|>\n<|im_start|>assistant\n"
    )


def run_tracker_turn(session, latest_exchange) -> StateDelta:
    """One state-update cycle: prompt the tracker, parse, apply to the log.

    The tracker channel's stale ephemeral region is dropped first, the new
    messages go in as ephemeral text, and the parsed delta is applied to the
    session's state log. On backend failure nothing is applied. Committing
    the delta to the cache ledgers is the caller's job.
    """
    if not latest_exchange:
        raise ValueError("tracker turn requires a non-empty exchange")
    cache = session.tracker_cache
    cache.rewind(turn_index=session.assistant_turns)
    cache.extend_ephemeral(tracker_ephemeral_text(latest_exchange), turn_index=session.assistant_turns)
    raw = session.backend.generate(cache.full_prompt_text(), "tracker")
    delta = parse_tracker_output(raw, session.state)
    session.state = apply_delta(session.state, delta, turn_index=session.assistant_turns)
    session.tracker_outputs.append(raw)
    return delta
