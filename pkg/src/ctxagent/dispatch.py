"""Agent control loop: prompt construction, action parsing, and turn stepping.

Each executor completion is classified as a direct response, a tool
selection (two-stage mode only), a tool call, or a cloud delegation (a tool
call whose target is the registry's cloud tool). Tool calls run against the
simulated environment and their observations feed back into the same
assistant turn until the executor answers in plain text or the inner-step
budget runs out.

Memory modes differ only in what survives between turns: full-history
sessions keep every conversational block in the cache ledger's ephemeral
region forever; state-log sessions rewind the ephemeral region at the start
of every user turn and persist nothing but committed state-log lines.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any

from . import memory
from .errors import MalformedToolCall, UnknownTool
from .kvcache import EXECUTOR, TRACKER, CacheState
from .memory import ContextState, PRIMING_LINE
from .schema import minify, tool_bank_text, tool_card
from .tokenizer import DEFAULT_TOKENIZER, Tokenizer
from .toolenv import Observation, ToolContext, ToolRegistry, error_observation, invoke
from .turns import (
    ASSISTANT,
    ASSISTANT_KINDS,
    KIND_CLOUD_DELEGATE,
    KIND_CSO_UPDATE,
    KIND_DIRECT_RESPONSE,
    KIND_OBSERVATION,
    KIND_SCHEMA_INJECTION,
    KIND_TOOL_CALL,
    KIND_TOOL_SELECT,
    KIND_USER,
    TOOL,
    TRACKER as TRACKER_ROLE,
    USER,
    Turn,
)

FULL_SCHEMAS = "full_schemas"
JIT = "jit"
FULL_HISTORY = "full_history"
CSO_MEMORY = "cso"


@dataclass(frozen=True)
class AgentMode:
    tool_mode: str
    memory_mode: str

    @property
    def name(self) -> str:
        return {
            (FULL_SCHEMAS, FULL_HISTORY): "baseline",
            (JIT, FULL_HISTORY): "jit",
            (FULL_SCHEMAS, CSO_MEMORY): "mem",
            (JIT, CSO_MEMORY): "combined",
        }[(self.tool_mode, self.memory_mode)]


MODES = {
    "baseline": AgentMode(FULL_SCHEMAS, FULL_HISTORY),
    "jit": AgentMode(JIT, FULL_HISTORY),
    "mem": AgentMode(FULL_SCHEMAS, CSO_MEMORY),
    "combined": AgentMode(JIT, CSO_MEMORY),
}


def parse_mode(name: str) -> AgentMode:
    try:
        return MODES[name]
    except KeyError:
        raise ValueError(f"unknown agent mode: {name!r} (expected one of {sorted(MODES)})") from None


DIRECT_RESPONSE = "direct_response"
TOOL_SELECT = "tool_select"
TOOL_CALL = "tool_call"
CLOUD_DELEGATE = "cloud_delegate"


@dataclass(frozen=True)
class AssistantAction:
    kind: str
    raw: str
    text: str | None = None
    tool_name: str | None = None
    reasoning: str | None = None
    arguments: dict[str, Any] | None = None


_TOOL_CALL_TAG = re.compile(r"<tool_call>(.*?)</tool_call>", re.DOTALL)
_TOOL_CALL_OPEN = re.compile(r"<tool_call>", re.DOTALL)
_TOOL_SELECT_TAG = re.compile(r"<tool_select>(.*?)</tool_select>", re.DOTALL)
_TOOL_SELECT_OPEN = re.compile(r"<tool_select>", re.DOTALL)


def parse_assistant_output(raw: str, registry: ToolRegistry, jit: bool = False) -> AssistantAction:
    """Classify an executor completion.

    Raises MalformedToolCall when a tag is present but its payload is not
    usable, and UnknownTool when the named tool is not in the registry; the
    loop converts both into error observations rather than crashing.
    """
    m = _TOOL_CALL_TAG.search(raw)
    if m:
        payload = _parse_tag_json(m.group(1), "tool_call")
        name = payload.get("name")
        if not isinstance(name, str) or not name:
            raise MalformedToolCall("tool_call payload has no tool name")
        arguments = payload.get("arguments", {})
        if not isinstance(arguments, dict):
            raise MalformedToolCall("tool_call arguments must be an object")
        if registry.resolve_name(name) is None:
            raise UnknownTool(f"tool not in registry: {name}")
        kind = CLOUD_DELEGATE if registry.is_cloud(name) else TOOL_CALL
        return AssistantAction(kind=kind, raw=raw, tool_name=name, arguments=arguments)
    if _TOOL_CALL_OPEN.search(raw):
        raise MalformedToolCall("unterminated tool_call tag")

    if jit:
        m = _TOOL_SELECT_TAG.search(raw)
        if m:
            payload = _parse_tag_json(m.group(1), "tool_select")
            name = payload.get("name")
            if not isinstance(name, str) or not name:
                raise MalformedToolCall("tool_select payload has no tool name")
            if registry.resolve_name(name) is None:
                raise UnknownTool(f"tool not in registry: {name}")
            return AssistantAction(
                kind=TOOL_SELECT, raw=raw, tool_name=name, reasoning=payload.get("reason", "")
            )
        if _TOOL_SELECT_OPEN.search(raw):
            raise MalformedToolCall("unterminated tool_select tag")

    return AssistantAction(kind=DIRECT_RESPONSE, raw=raw, text=raw.strip())


def _parse_tag_json(body: str, tag: str) -> dict[str, Any]:
    try:
        payload = json.loads(body)
    except json.JSONDecodeError as e:
        raise MalformedToolCall(f"{tag} payload is not valid JSON: {e}") from None
    if not isinstance(payload, dict):
        raise MalformedToolCall(f"{tag} payload must be a JSON object")
    return payload


# --- prompt construction ----------------------------------------------------

DEFAULT_SYSTEM_TEXT = (
    "You are AIM, an on-device assistant. For each user message decide whether "
    "to answer directly, call one of your local tools, or delegate complex "
    "queries to the cloud tool."
)

JIT_PROTOCOL_TEXT = (
    'To use a tool, first output <tool_select>{"name": ..., "reason": ...}</tool_select>; '
    "its full schema will arrive as an observation, after which you may call it "
    'with <tool_call>{"name": ..., "arguments": {...}}</tool_call>.'
)

CSO_STATUS_HEADER = "This is a current status of the conversation."


def build_executor_base(
    mode: AgentMode,
    registry: ToolRegistry,
    system_text: str = DEFAULT_SYSTEM_TEXT,
    bank_description_len: int | None = None,
) -> str:
    parts = ["<|im_start|>system\n", system_text, "\nYou have access to a set of tools.\n"]
    if mode.tool_mode == FULL_SCHEMAS:
        blocks = "\n".join(minify(s).text for s in registry.schemas())
        parts.append(f"<tools>\n{blocks}\n</tools>")
    else:
        cards = [tool_card(s, bank_description_len) for s in registry.schemas()]
        parts.append(f"{JIT_PROTOCOL_TEXT}\nAvailable tools:\n{tool_bank_text(cards)}")
    if mode.memory_mode == CSO_MEMORY:
        parts.append(f"\n{CSO_STATUS_HEADER}\n{PRIMING_LINE}")
    return "".join(parts)


def user_block(text: str) -> str:
    return f"<|im_end|>\n<|im_start|>user\n{text}<|im_end|>\n<|im_start|>assistant\n"


def observation_block(text: str) -> str:
    return f"<|im_end|>\n<|im_start|>tool\n{text}<|im_end|>\n<|im_start|>assistant\n"


def build_executor_prompt(session: "Session", pending_injection=None) -> str:
    """The exact prompt the executor would receive for its next generation."""
    base = session.executor_cache.full_prompt_text()
    if pending_injection is not None:
        base += observation_block(pending_injection.text)
    return base


@dataclass
class DispatchState:
    phase: str = "idle"  # idle | awaiting_selection | awaiting_call | awaiting_observation
    selected_tool: str | None = None
    select_loop_count: int = 0


@dataclass
class SessionConfig:
    max_inner_steps: int = 8
    max_select_loops: int = 3
    system_text: str = DEFAULT_SYSTEM_TEXT
    bank_description_len: int | None = None
    executor_base_override: str | None = None
    tracker_base_override: str | None = None
    seed: int = 0


class Session:
    """One conversation: state log, cache ledgers, trajectory, tool state.

    All mutation happens through step_turn and is serialized by the caller
    (one in-flight turn per session); the registry and schemas are shared
    immutable data.
    """

    def __init__(
        self,
        session_id: str,
        mode: AgentMode,
        registry: ToolRegistry,
        backend,
        tokenizer: Tokenizer = DEFAULT_TOKENIZER,
        config: SessionConfig | None = None,
    ):
        self.id = session_id
        self.mode = mode
        self.registry = registry
        self.backend = backend
        self.tokenizer = tokenizer
        self.config = config or SessionConfig()
        self.state = ContextState()
        self.executor_cache = CacheState(EXECUTOR, tokenizer)
        self.tracker_cache = CacheState(TRACKER, tokenizer)
        self.turns: list[Turn] = []
        self.assistant_turns = 0
        self.tracker_outputs: list[str] = []
        self.made_calls: list[ToolCallRecord] = []
        self.tool_state: dict[str, Any] = {}
        self.dispatch_state = DispatchState()
        self.context_series: list[tuple[int, int]] = []
        self.closed = False

        executor_base = self.config.executor_base_override or build_executor_base(
            mode, registry, self.config.system_text, self.config.bank_description_len
        )
        tracker_base = self.config.tracker_base_override or memory.tracker_base_prompt()
        self.executor_cache.prime(executor_base, turn_index=0)
        self.tracker_cache.prime(tracker_base, turn_index=0)
        self.context_series.append((0, self.executor_cache.permanent_len))

    @property
    def uses_state_log(self) -> bool:
        return self.mode.memory_mode == CSO_MEMORY

    def tool_context(self) -> ToolContext:
        return ToolContext(
            session_id=self.id, seed=self.config.seed, state=self.tool_state, tokenizer=self.tokenizer
        )

    def _append(self, turn: Turn) -> Turn:
        self.turns.append(turn)
        return turn

    def new_turn(self, **kwargs) -> Turn:
        return self._append(Turn(session_id=self.id, turn_index=len(self.turns), **kwargs))


@dataclass
class ToolCallRecord:
    """One attempted call, for precision/recall accounting."""

    name: str | None
    tool_id: str | None
    arguments: dict[str, Any] | None
    malformed: bool = False
    unknown: bool = False

    @property
    def matchable_id(self) -> str | None:
        if self.malformed or self.unknown:
            return None
        return self.tool_id


def step_turn(session: Session, user_text: str) -> list[Turn]:
    """Advance the conversation by one user turn.

    Runs the executor (and, in state-log mode, the tracker update cycle after
    every non-protocol generation) until a direct response lands or a budget
    trips. Returns every turn appended during this call, each assistant turn
    annotated with its input-context token length.
    """
    first_new = len(session.turns)
    cfg = session.config

    if session.uses_state_log:
        session.executor_cache.rewind(turn_index=session.assistant_turns)
        session.tracker_cache.rewind(turn_index=session.assistant_turns)

    user_turn = session.new_turn(role=USER, kind=KIND_USER, content=user_text)
    session.executor_cache.extend_ephemeral(user_block(user_text), turn_index=session.assistant_turns)
    pending_exchange: list[Turn] = [user_turn]

    inner_steps = 0
    select_history: list[str] = []
    session.dispatch_state = DispatchState()

    while True:
        if inner_steps >= cfg.max_inner_steps:
            session.new_turn(
                role=ASSISTANT,
                kind=KIND_DIRECT_RESPONSE,
                content="I was unable to complete this request within the step budget.",
                input_context_tokens=session.executor_cache.full_prompt_len(),
                assistant_turn=session.assistant_turns,
                diagnostic=f"turn_budget_exceeded after {inner_steps} steps",
            )
            break
        inner_steps += 1

        input_len = session.executor_cache.full_prompt_len()
        raw = session.backend.generate(session.executor_cache.full_prompt_text(), EXECUTOR)
        session.assistant_turns += 1
        session.executor_cache.extend_ephemeral(raw, turn_index=session.assistant_turns)
        session.context_series.append((session.assistant_turns, input_len))

        try:
            action = parse_assistant_output(raw, session.registry, jit=session.mode.tool_mode == JIT)
        except (MalformedToolCall, UnknownTool) as e:
            failed_turn = session.new_turn(
                role=ASSISTANT,
                kind=KIND_TOOL_CALL,
                content=raw,
                input_context_tokens=input_len,
                assistant_turn=session.assistant_turns,
                malformed=True,
            )
            session.made_calls.append(
                ToolCallRecord(
                    name=None,
                    tool_id=None,
                    arguments=None,
                    malformed=isinstance(e, MalformedToolCall),
                    unknown=isinstance(e, UnknownTool),
                )
            )
            _tracker_cycle(session, pending_exchange + [failed_turn])
            obs = error_observation("unknown", str(e))
            obs_turn = _record_observation(session, obs)
            session.executor_cache.extend_ephemeral(
                observation_block(obs.text()), turn_index=session.assistant_turns
            )
            pending_exchange = [obs_turn]
            continue

        if action.kind == DIRECT_RESPONSE:
            # content keeps the raw completion so a replay feeds the backend's
            # exact bytes back through this same code path.
            response_turn = session.new_turn(
                role=ASSISTANT,
                kind=KIND_DIRECT_RESPONSE,
                content=action.raw,
                input_context_tokens=input_len,
                assistant_turn=session.assistant_turns,
            )
            session.dispatch_state = DispatchState(phase="idle")
            _tracker_cycle(session, pending_exchange + [response_turn])
            break

        if action.kind == TOOL_SELECT:
            session.new_turn(
                role=ASSISTANT,
                kind=KIND_TOOL_SELECT,
                content=action.raw,
                input_context_tokens=input_len,
                assistant_turn=session.assistant_turns,
                tool_name=action.tool_name,
            )
            select_history.append(action.tool_name or "")
            repeats = select_history.count(action.tool_name or "")
            session.dispatch_state = DispatchState(
                phase="awaiting_call", selected_tool=action.tool_name, select_loop_count=repeats
            )
            if repeats >= cfg.max_select_loops:
                session.new_turn(
                    role=ASSISTANT,
                    kind=KIND_DIRECT_RESPONSE,
                    content="I seem unable to make progress selecting a tool for this request.",
                    input_context_tokens=session.executor_cache.full_prompt_len(),
                    assistant_turn=session.assistant_turns,
                    diagnostic=f"select_loop detected on {action.tool_name}",
                )
                break
            compact = minify(session.registry.get(session.registry.resolve_name(action.tool_name)).schema)
            session.new_turn(
                role=TOOL,
                kind=KIND_SCHEMA_INJECTION,
                content=compact.text,
                tool_name=action.tool_name,
            )
            session.executor_cache.extend_ephemeral(
                observation_block(compact.text), turn_index=session.assistant_turns
            )
            continue

        # tool call or cloud delegation
        call_turn = session.new_turn(
            role=ASSISTANT,
            kind=KIND_CLOUD_DELEGATE if action.kind == CLOUD_DELEGATE else KIND_TOOL_CALL,
            content=action.raw,
            input_context_tokens=input_len,
            assistant_turn=session.assistant_turns,
            tool_name=action.tool_name,
            arguments=action.arguments,
        )
        session.made_calls.append(
            ToolCallRecord(
                name=action.tool_name,
                tool_id=session.registry.resolve_name(action.tool_name or ""),
                arguments=action.arguments,
            )
        )
        _tracker_cycle(session, pending_exchange + [call_turn])
        obs = invoke(session.registry, action, session.tool_context())
        obs_turn = _record_observation(session, obs)
        session.executor_cache.extend_ephemeral(
            observation_block(obs.text()), turn_index=session.assistant_turns
        )
        session.dispatch_state = DispatchState(phase="awaiting_observation")
        pending_exchange = [obs_turn]

    return session.turns[first_new:]


def _record_observation(session: Session, obs: Observation) -> Turn:
    return session.new_turn(
        role=TOOL,
        kind=KIND_OBSERVATION,
        content=obs.text(),
        tool_name=obs.tool_id,
        success=obs.success,
    )


def _tracker_cycle(session: Session, exchange: list[Turn]) -> None:
    """State-update cycle after a non-protocol assistant generation."""
    if not session.uses_state_log:
        return
    delta = memory.run_tracker_turn(session, exchange)
    rendered = delta.rendered()
    if rendered:
        session.executor_cache.commit_delta(rendered, turn_index=session.assistant_turns)
        session.tracker_cache.commit_delta(rendered, turn_index=session.assistant_turns)
    session.new_turn(
        role=TRACKER_ROLE,
        kind=KIND_CSO_UPDATE,
        content=session.tracker_outputs[-1],
        success=not delta.is_no_update and not delta.is_empty,
    )


def replay_session(
    meta,
    turns: list[Turn],
    registry: ToolRegistry,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
) -> Session:
    """Rebuild a session by replaying a persisted trajectory.

    The recorded executor and tracker completions are fed back through
    step_turn via a queue backend, so the rebuilt state log and cache
    ledgers must come out byte-identical to the originals (tool handlers are
    deterministic in the session seed).
    """
    from .backend import QueueBackend

    executor_outputs = [
        t.content
        for t in turns
        if t.role == ASSISTANT and t.kind in ASSISTANT_KINDS and t.diagnostic is None
    ]
    tracker_outputs = [t.content for t in turns if t.kind == KIND_CSO_UPDATE]
    backend = QueueBackend(
        {"executor": executor_outputs, "tracker": tracker_outputs}, tokenizer=tokenizer
    )
    config = SessionConfig(
        executor_base_override=meta.executor_base or None,
        tracker_base_override=meta.tracker_base or None,
        seed=int(meta.extra.get("seed", 0)),
    )
    session = Session(
        session_id=meta.session_id,
        mode=parse_mode(meta.mode),
        registry=registry,
        backend=backend,
        tokenizer=tokenizer,
        config=config,
    )
    for turn in turns:
        if turn.role == USER:
            step_turn(session, turn.content)
    return session
