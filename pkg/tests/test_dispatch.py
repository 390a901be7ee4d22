"""Control loop: action parsing, prompt construction, turn stepping, replay."""

import json

import pytest
from hypothesis import given, settings, strategies as st

from ctxagent.backend import QueueBackend, Script, ScriptedBackend
from ctxagent.dispatch import (
    CLOUD_DELEGATE,
    DIRECT_RESPONSE,
    MODES,
    Session,
    SessionConfig,
    TOOL_CALL,
    TOOL_SELECT,
    build_executor_base,
    build_executor_prompt,
    parse_assistant_output,
    replay_session,
    step_turn,
)
from ctxagent.errors import MalformedToolCall, UnknownTool
from ctxagent.fixtures import wifi_ticket_backend, wifi_ticket_config
from ctxagent.schema import minify
from ctxagent.tokenizer import _fallback
from ctxagent.toolenv import ToolRegistry
from ctxagent.turns import (
    KIND_CSO_UPDATE,
    KIND_DIRECT_RESPONSE,
    KIND_OBSERVATION,
    KIND_SCHEMA_INJECTION,
    KIND_TOOL_CALL,
    KIND_TOOL_SELECT,
)

WIFI_QUERY = "My Wi-Fi is not working, please create an IT ticket."
STATUS_QUERY = "What's the status of that ticket?"


class TestParseAssistantOutput:
    def test_tool_call(self, registry):
        raw = '<tool_call>{"name":"set_timer","arguments":{"duration_seconds":1200}}</tool_call>'
        action = parse_assistant_output(raw, registry)
        assert action.kind == TOOL_CALL
        assert action.tool_name == "set_timer"
        assert action.arguments == {"duration_seconds": 1200}

    def test_plain_text(self, registry):
        action = parse_assistant_output("I've created ticket IT7390 for you.", registry)
        assert action.kind == DIRECT_RESPONSE
        assert action.text == "I've created ticket IT7390 for you."

    def test_cloud_delegation_is_tool_call_to_cloud(self, registry):
        raw = '<tool_call>{"name":"process_with_cloud_llm","arguments":{"user_query_context":"x","reason_for_escalation":"y"}}</tool_call>'
        assert parse_assistant_output(raw, registry).kind == CLOUD_DELEGATE

    def test_truncated_tag_is_malformed(self, registry):
        with pytest.raises(MalformedToolCall):
            parse_assistant_output('<tool_call>{"name":"set_timer","arguments":', registry)

    def test_invalid_json_is_malformed(self, registry):
        with pytest.raises(MalformedToolCall):
            parse_assistant_output("<tool_call>{not json}</tool_call>", registry)

    def test_unknown_tool(self, registry):
        with pytest.raises(UnknownTool):
            parse_assistant_output('<tool_call>{"name":"teleport","arguments":{}}</tool_call>', registry)

    def test_select_in_jit_mode(self, registry):
        raw = '<tool_select>{"name":"set_timer","reason":"user asked for a timer"}</tool_select>'
        action = parse_assistant_output(raw, registry, jit=True)
        assert action.kind == TOOL_SELECT
        assert action.tool_name == "set_timer"
        assert action.reasoning == "user asked for a timer"

    def test_select_outside_jit_is_plain_text(self, registry):
        raw = '<tool_select>{"name":"set_timer","reason":"r"}</tool_select>'
        assert parse_assistant_output(raw, registry, jit=False).kind == DIRECT_RESPONSE


class TestPromptConstruction:
    def test_full_schemas_base_embeds_tools_block(self, registry):
        base = build_executor_base(MODES["baseline"], registry)
        assert "<tools>" in base and "</tools>" in base
        assert minify(registry.get("set_timer").schema).text in base

    def test_jit_base_embeds_bank_only(self, registry):
        base = build_executor_base(MODES["jit"], registry)
        assert "<tools>" not in base
        assert "set_timer: Sets a timer for a specified duration." in base
        assert '"duration_seconds"' not in base

    def test_state_log_header_only_in_cso_modes(self, registry):
        assert "# This is the start of the conversation." in build_executor_base(MODES["mem"], registry)
        assert "# This is the start of the conversation." not in build_executor_base(MODES["baseline"], registry)

    def test_jit_fresh_prompt_under_quarter_of_baseline(self, registry):
        # 12-tool registry, per the two-stage design's initial-context claim
        schemas = registry.schemas()[:11] + [registry.get("process_with_cloud_llm").schema]
        twelve = ToolRegistry("twelve", "process_with_cloud_llm")
        for s in schemas:
            twelve.add(s, registry.get(s.id).handler)
        twelve.finalize()
        jit = Session("j", MODES["combined"], twelve, QueueBackend({}))
        full = Session("f", MODES["mem"], twelve, QueueBackend({}))
        ratio = jit.executor_cache.permanent_len / full.executor_cache.permanent_len
        assert ratio < 0.25, f"jit/full initial prompt ratio {ratio:.3f}"


def wifi_session(mode="mem"):
    return Session(
        "wifi", MODES[mode], wifi_session.registry, wifi_ticket_backend(), config=wifi_ticket_config()
    )


@pytest.fixture(autouse=True)
def _bind_registry(small_registry):
    wifi_session.registry = small_registry


class TestWifiFlow:
    def test_turn_one_sequence(self):
        session = wifi_session()
        turns = step_turn(session, WIFI_QUERY)
        kinds = [t.kind for t in turns]
        assert kinds == [
            "user",
            KIND_TOOL_CALL,
            KIND_CSO_UPDATE,
            KIND_OBSERVATION,
            KIND_DIRECT_RESPONSE,
            KIND_CSO_UPDATE,
        ]
        assert "IT7390" in turns[-2].content
        assert "user_goal: create_it_ticket" in session.state.text
        assert "ticket_id: IT7390" in session.state.text

    def test_follow_up_uses_state_log_not_history(self):
        session = wifi_session()
        step_turn(session, WIFI_QUERY)
        turns = step_turn(session, STATUS_QUERY)
        call = next(t for t in turns if t.kind == KIND_TOOL_CALL)
        assert call.arguments == {"action": "check_ticket_status", "ticket_id": "IT7390"}
        obs = next(t for t in turns if t.kind == KIND_OBSERVATION)
        assert json.loads(obs.content)["ticket_status"] == "open"

    def test_state_log_prompt_containment(self):
        session = wifi_session()
        step_turn(session, WIFI_QUERY)
        step_turn(session, STATUS_QUERY)
        prompt = build_executor_prompt(session)
        assert "user_goal: create_it_ticket" in prompt
        assert WIFI_QUERY not in prompt  # rewound with the turn-1 ephemeral region

    def test_full_history_prompt_contains_turns_verbatim(self):
        session = wifi_session("baseline")
        step_turn(session, WIFI_QUERY)
        step_turn(session, STATUS_QUERY)
        prompt = build_executor_prompt(session)
        assert WIFI_QUERY in prompt
        assert STATUS_QUERY in prompt
        assert prompt.index(WIFI_QUERY) < prompt.index(STATUS_QUERY)

    def test_mode_equivalence_on_tool_outcome(self):
        calls = {}
        for mode in ("baseline", "mem"):
            session = wifi_session(mode)
            step_turn(session, WIFI_QUERY)
            step_turn(session, STATUS_QUERY)
            calls[mode] = [(r.name, json.dumps(r.arguments, sort_keys=True)) for r in session.made_calls]
        assert calls["baseline"] == calls["mem"]

    def test_context_accounting_against_recount(self, small_registry):
        """Recorded input lengths must equal a full recount of the exact prompt
        bytes the backend received (ledger arithmetic vs from-scratch scan)."""
        captured = []
        inner = wifi_ticket_backend()

        class Spy:
            tokenizer = inner.tokenizer

            def generate(self, prompt, channel):
                if channel == "executor":
                    captured.append(prompt)
                return inner.generate(prompt, channel)

        session = Session("spy", MODES["mem"], small_registry, Spy(), config=wifi_ticket_config())
        step_turn(session, WIFI_QUERY)
        step_turn(session, STATUS_QUERY)
        recorded = [t.input_context_tokens for t in session.turns if t.role == "assistant"]
        assert recorded == [_fallback.count_tokens(p) for p in captured]


def jit_script(registry):
    compact = minify(registry.get("set_timer").schema).text
    return [
        {
            "channel": "executor",
            "contains": "timer for 20 minutes",
            "output": '<tool_select>{"name":"set_timer","reason":"user wants a countdown"}</tool_select>',
        },
        {
            "channel": "executor",
            "contains": compact[:40],
            "output": '<tool_call>{"name":"set_timer","arguments":{"duration_seconds":1200}}</tool_call>',
        },
        {"channel": "executor", "contains": "timer_id", "output": "Timer set for 20 minutes."},
    ]


class TestJit:
    def test_two_phase_ordering(self, small_registry):
        backend = ScriptedBackend(Script.from_json(jit_script(small_registry)))
        session = Session("jit", MODES["jit"], small_registry, backend)
        turns = step_turn(session, "Set a timer for 20 minutes.")
        kinds = [t.kind for t in turns]
        assert kinds == [
            "user",
            KIND_TOOL_SELECT,
            KIND_SCHEMA_INJECTION,
            KIND_TOOL_CALL,
            KIND_OBSERVATION,
            KIND_DIRECT_RESPONSE,
        ]
        select, injection, call = turns[1], turns[2], turns[3]
        assert select.tool_name == call.tool_name == "set_timer"
        assert injection.content == minify(small_registry.get("set_timer").schema).text

    def test_injected_schema_visible_to_call_step(self, small_registry):
        prompts = []
        inner = ScriptedBackend(Script.from_json(jit_script(small_registry)))

        class Spy:
            tokenizer = inner.tokenizer

            def generate(self, prompt, channel):
                prompts.append(prompt)
                return inner.generate(prompt, channel)

        session = Session("jit", MODES["jit"], small_registry, Spy())
        step_turn(session, "Set a timer for 20 minutes.")
        # selection prompt holds the bank only; call prompt holds the injected schema
        assert '"duration_seconds":{"type":"integer"' not in prompts[0]
        assert minify(small_registry.get("set_timer").schema).text in prompts[1]

    def test_select_loop_detection(self, small_registry):
        select = '<tool_select>{"name":"set_timer","reason":"still deciding"}</tool_select>'
        backend = QueueBackend({"executor": [select] * 5})
        session = Session("loop", MODES["jit"], small_registry, backend)
        turns = step_turn(session, "Set a timer.")
        assert turns[-1].diagnostic is not None
        assert "select_loop" in turns[-1].diagnostic
        selects = [t for t in turns if t.kind == KIND_TOOL_SELECT]
        assert len(selects) == session.config.max_select_loops


class TestFailurePaths:
    def test_turn_budget_on_repeated_failing_call(self, small_registry):
        bad = '<tool_call>{"name":"manage_it_support_ticket","arguments":{"action":"close","ticket_id":"IT0"}}</tool_call>'
        backend = QueueBackend({"executor": [bad] * 20})
        session = Session("budget", MODES["baseline"], small_registry, backend)
        turns = step_turn(session, "close my ticket")
        assert turns[-1].diagnostic == "turn_budget_exceeded after 8 steps"
        errors = [t for t in turns if t.kind == KIND_OBSERVATION and t.success is False]
        assert len(errors) == 8  # one error observation per failed attempt, all recorded

    def test_malformed_call_becomes_error_observation(self, small_registry):
        backend = QueueBackend({"executor": ['<tool_call>{"name":', "Sorry, let me rephrase."]})
        session = Session("malformed", MODES["baseline"], small_registry, backend)
        turns = step_turn(session, "do something")
        obs = next(t for t in turns if t.kind == KIND_OBSERVATION)
        payload = json.loads(obs.content)
        assert payload["success"] is False and "error" in payload
        assert turns[-1].kind == KIND_DIRECT_RESPONSE
        assert session.made_calls[0].malformed

    def test_unknown_tool_becomes_error_observation(self, small_registry):
        backend = QueueBackend(
            {"executor": ['<tool_call>{"name":"teleport","arguments":{}}</tool_call>', "ok"]}
        )
        session = Session("unknown", MODES["baseline"], small_registry, backend)
        turns = step_turn(session, "beam me up")
        obs = next(t for t in turns if t.kind == KIND_OBSERVATION)
        assert "teleport" in json.loads(obs.content)["error"]
        assert session.made_calls[0].unknown


@given(st.text(max_size=80))
@settings(max_examples=60, deadline=None)
def test_malformed_fuzz_never_crashes(body):
    registry = wifi_session.registry
    outputs = [f"<tool_call>{body}", "recovered."]
    session = Session("fuzz", MODES["baseline"], registry, QueueBackend({"executor": outputs}))
    turns = step_turn(session, "fuzz input")
    assert turns[-1].kind == KIND_DIRECT_RESPONSE or turns[-1].diagnostic


class TestReplay:
    def test_rebuild_matches_original(self, small_registry):
        from ctxagent.turns import TrajectoryMeta

        original = wifi_session()
        step_turn(original, WIFI_QUERY)
        step_turn(original, STATUS_QUERY)
        meta = TrajectoryMeta(
            session_id=original.id,
            mode=original.mode.name,
            registry_id=small_registry.id,
            executor_base=original.executor_cache.base_prompt(),
            tracker_base=original.tracker_cache.base_prompt(),
            extra={"seed": 0},
        )
        rebuilt = replay_session(meta, original.turns, small_registry)
        assert rebuilt.state.text == original.state.text
        assert rebuilt.executor_cache.permanent_text == original.executor_cache.permanent_text
        assert rebuilt.executor_cache.permanent_len == original.executor_cache.permanent_len
        assert rebuilt.tracker_cache.permanent_len == original.tracker_cache.permanent_len
        assert rebuilt.context_series == original.context_series
        assert [t.to_json() for t in rebuilt.turns] == [t.to_json() for t in original.turns]
