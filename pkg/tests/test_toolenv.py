"""Tool environment: validation, handlers, error shapes, cloud verbosity."""

import json

import pytest

from ctxagent.dispatch import AssistantAction, TOOL_CALL
from ctxagent.errors import UnknownTool
from ctxagent.tokenizer import count_tokens
from ctxagent.toolenv import (
    ToolContext,
    VerbosityProfile,
    cloud_respond,
    deterministic_text,
    invoke,
    validate_arguments,
)


def call(name, arguments):
    return AssistantAction(kind=TOOL_CALL, raw="", tool_name=name, arguments=arguments)


def ctx(seed=0, state=None):
    return ToolContext(session_id="s1", seed=seed, state=state if state is not None else {})


class TestValidation:
    def test_missing_required(self, registry):
        schema = registry.get("set_timer").schema
        assert validate_arguments(schema, {}) == "missing required parameter: duration_seconds"

    def test_unknown_parameter(self, registry):
        schema = registry.get("set_timer").schema
        assert validate_arguments(schema, {"duration_seconds": 5, "snooze": True}) == "unknown parameter: snooze"

    def test_type_kind(self, registry):
        schema = registry.get("set_timer").schema
        assert validate_arguments(schema, {"duration_seconds": "twenty"}) == (
            "parameter duration_seconds must be of type integer"
        )
        assert validate_arguments(schema, {"duration_seconds": True}) is not None
        assert validate_arguments(schema, {"duration_seconds": 1200}) is None


class TestInvoke:
    def test_ticket_create_returns_it7390(self, registry):
        obs = invoke(registry, call("manage_it_support_ticket", {"action": "create", "issue_description": "wifi_not_working"}), ctx())
        assert obs.success
        assert obs.payload["ticket_id"] == "IT7390"
        assert obs.payload["status"] == "success"

    def test_missing_required_error_shape(self, registry):
        obs = invoke(registry, call("set_timer", {}), ctx())
        assert obs.payload == {"error": "missing required parameter: duration_seconds", "success": False}

    def test_failure_payload_has_exactly_error_and_success(self, registry):
        obs = invoke(registry, call("manage_device_files", {"operation": "fly"}), ctx())
        assert not obs.success
        assert set(obs.payload.keys()) == {"error", "success"}
        assert json.loads(obs.text())["success"] is False

    def test_inapplicable_parameter_message(self, registry):
        obs = invoke(
            registry,
            call(
                "manage_device_files",
                {
                    "operation": "search_files",
                    "path_or_search_query": "/documents/projects",
                    "file_type_filter_for_search": "txt",
                    "new_name_or_destination_path": "configuration",
                },
            ),
            ctx(),
        )
        assert not obs.success
        assert "'new_name_or_destination_path' parameter is not applicable" in obs.payload["error"]
        assert "search_files" in obs.payload["error"]

    def test_corrected_search_succeeds(self, registry):
        obs = invoke(
            registry,
            call(
                "manage_device_files",
                {
                    "operation": "search_files",
                    "path_or_search_query": "/documents/projects",
                    "file_type_filter_for_search": "txt",
                },
            ),
            ctx(),
        )
        assert obs.success
        assert all(m.endswith(".txt") for m in obs.payload["matches"])

    def test_unknown_tool_raises(self, registry):
        with pytest.raises(UnknownTool):
            invoke(registry, call("teleport", {}), ctx())

    def test_ticket_state_persists_in_session(self, registry):
        state = {}
        invoke(registry, call("manage_it_support_ticket", {"action": "create"}), ctx(state=state))
        obs = invoke(
            registry,
            call("manage_it_support_ticket", {"action": "check_ticket_status", "ticket_id": "IT7390"}),
            ctx(state=state),
        )
        assert obs.payload["ticket_status"] == "open"
        second = invoke(registry, call("manage_it_support_ticket", {"action": "create"}), ctx(state=state))
        assert second.payload["ticket_id"] != "IT7390"

    def test_unknown_ticket_fails_cleanly(self, registry):
        obs = invoke(
            registry,
            call("manage_it_support_ticket", {"action": "check_ticket_status", "ticket_id": "IT0"}),
            ctx(),
        )
        assert obs.payload["success"] is False

    def test_network_toggle_shape(self, registry):
        obs = invoke(registry, call("manage_network_settings", {"action": "toggle_wifi"}), ctx())
        assert obs.payload == {"status": "success", "action": "toggle_wifi", "new_state": "disabled"}

    def test_handler_determinism(self, registry):
        a = invoke(registry, call("manage_messages", {"action": "send", "recipient": "Alex"}), ctx(seed=7))
        b = invoke(registry, call("manage_messages", {"action": "send", "recipient": "Alex"}), ctx(seed=7))
        assert a.payload == b.payload


class TestCloudRespond:
    def test_default_profile_token_length(self):
        obs = cloud_respond("what is the weather pattern", VerbosityProfile(400))
        n = count_tokens(obs.payload["content"])
        assert abs(n - 400) <= 2
        assert obs.success

    def test_verbose_profile(self):
        obs = cloud_respond("long question", VerbosityProfile.named("verbose"))
        assert abs(count_tokens(obs.payload["content"]) - 800) <= 2

    def test_zero_profile(self):
        obs = cloud_respond("q", VerbosityProfile(0))
        assert obs.payload["content"] == ""
        assert obs.success

    def test_determinism(self):
        a = cloud_respond("same query", VerbosityProfile(120))
        b = cloud_respond("same query", VerbosityProfile(120))
        assert a.payload == b.payload

    def test_different_queries_differ(self):
        a = cloud_respond("query one", VerbosityProfile(120))
        b = cloud_respond("query two", VerbosityProfile(120))
        assert a.payload != b.payload

    @pytest.mark.parametrize("target", [1, 2, 7, 50, 401])
    def test_deterministic_text_exact(self, target):
        assert count_tokens(deterministic_text("seed", target)) == target


def test_registry_loads_array_schema_files(tmp_path, registry):
    from ctxagent.schema import minify
    from ctxagent.toolenv import load_registry

    tools = [
        json.loads(minify(registry.get(tid).schema).text)
        for tid in ("set_timer", "process_with_cloud_llm")
    ]
    (tmp_path / "bundle.json").write_text(json.dumps(tools), encoding="utf-8")
    manifest = {
        "id": "bundled",
        "cloud_tool_id": "process_with_cloud_llm",
        "tools": [
            {"id": "set_timer", "file": "bundle.json", "handler": "timer"},
            {"id": "process_with_cloud_llm", "file": "bundle.json", "handler": "cloud_llm"},
        ],
    }
    (tmp_path / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
    loaded = load_registry(tmp_path / "manifest.json")
    assert len(loaded) == 2
    assert loaded.get("set_timer").schema == registry.get("set_timer").schema


def test_with_config_overrides(registry):
    tuned = registry.with_config({"process_with_cloud_llm": {"target_tokens": 64}})
    obs = invoke(
        tuned,
        call("process_with_cloud_llm", {"user_query_context": "q", "reason_for_escalation": "r"}),
        ctx(),
    )
    assert abs(count_tokens(obs.payload["content"]) - 64) <= 2
    # original untouched
    obs2 = invoke(
        registry,
        call("process_with_cloud_llm", {"user_query_context": "q", "reason_for_escalation": "r"}),
        ctx(),
    )
    assert abs(count_tokens(obs2.payload["content"]) - 400) <= 2
