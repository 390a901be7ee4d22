"""Simulated on-device tool environment.

A registry maps tool ids to (schema, handler). Handlers are pure functions
of (arguments, per-session context) and return realistic success or failure
payloads; domain failures never raise. Failure payloads carry exactly the
keys ``error`` and ``success`` so the agent sees a stable error shape.

The cloud-delegation tool is an ordinary registry entry whose handler
produces deterministic, verbose text at a configurable token length — the
stress generator for context-growth experiments.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .errors import UnknownTool
from .schema import ToolSchema, parse_tool_schema
from .tokenizer import DEFAULT_TOKENIZER, Tokenizer

JSON_TYPE_CHECKS = {
    "string": lambda v: isinstance(v, str),
    "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "boolean": lambda v: isinstance(v, bool),
    "array": lambda v: isinstance(v, list),
    "object": lambda v: isinstance(v, dict),
}


@dataclass(frozen=True)
class Observation:
    """Result of one tool invocation, as the agent will see it."""

    payload: Any
    success: bool
    tool_id: str

    def text(self) -> str:
        return json.dumps(self.payload, ensure_ascii=False)


def error_observation(tool_id: str, message: str) -> Observation:
    return Observation(payload={"error": message, "success": False}, success=False, tool_id=tool_id)


@dataclass
class ToolContext:
    """Per-session handler environment: isolated state plus a stable seed."""

    session_id: str
    seed: int
    state: dict[str, Any] = field(default_factory=dict)
    tokenizer: Tokenizer = DEFAULT_TOKENIZER
    config: dict[str, Any] = field(default_factory=dict)


ToolHandler = Callable[[dict[str, Any], ToolContext], dict[str, Any]]


@dataclass(frozen=True)
class RegisteredTool:
    schema: ToolSchema
    handler: ToolHandler
    config: dict[str, Any] = field(default_factory=dict)


class ToolRegistry:
    def __init__(self, registry_id: str, cloud_tool_id: str):
        self.id = registry_id
        self.cloud_tool_id = cloud_tool_id
        self._tools: dict[str, RegisteredTool] = {}
        self._by_name: dict[str, str] = {}

    def add(self, schema: ToolSchema, handler: ToolHandler, config: dict[str, Any] | None = None):
        if schema.id in self._tools:
            raise ValueError(f"duplicate tool id: {schema.id}")
        self._tools[schema.id] = RegisteredTool(schema, handler, config or {})
        self._by_name[schema.name] = schema.id

    def finalize(self):
        if self.cloud_tool_id not in self._tools:
            raise ValueError(f"cloud tool {self.cloud_tool_id!r} missing from registry")
        return self

    def __len__(self):
        return len(self._tools)

    def ids(self) -> list[str]:
        return list(self._tools)

    def schemas(self) -> list[ToolSchema]:
        return [t.schema for t in self._tools.values()]

    def get(self, tool_id: str) -> RegisteredTool:
        try:
            return self._tools[tool_id]
        except KeyError:
            raise UnknownTool(f"tool not in registry: {tool_id}") from None

    def resolve_name(self, name: str) -> str | None:
        """Tool id for a function name, or None if unknown."""
        if name in self._tools:
            return name
        return self._by_name.get(name)

    def with_config(self, overrides: dict[str, dict[str, Any]]) -> "ToolRegistry":
        """Copy of the registry with per-tool handler config overrides merged in."""
        clone = ToolRegistry(self.id, self.cloud_tool_id)
        for tool_id, tool in self._tools.items():
            config = dict(tool.config)
            config.update(overrides.get(tool_id, {}))
            clone.add(tool.schema, tool.handler, config)
        return clone.finalize()

    def is_cloud(self, name_or_id: str) -> bool:
        return self.resolve_name(name_or_id) == self.cloud_tool_id


def validate_arguments(schema: ToolSchema, arguments: dict[str, Any]) -> str | None:
    """Schema-level argument check: required presence, declared keys, type kind.

    Returns an error message or None. Deeper semantics are the handler's job.
    """
    props = schema.properties()
    for req in schema.required_params():
        if req not in arguments:
            return f"missing required parameter: {req}"
    for key, value in arguments.items():
        if props and key not in props:
            return f"unknown parameter: {key}"
        declared = props.get(key, {}).get("type")
        check = JSON_TYPE_CHECKS.get(declared)
        if check and not check(value):
            return f"parameter {key} must be of type {declared}"
    return None


def invoke(registry: ToolRegistry, call, ctx: ToolContext) -> Observation:
    """Run one tool call: validate against the schema, then hand to the handler.

    ``call`` needs ``tool_name`` and ``arguments`` attributes. Domain failures
    come back as error observations; only a registry miss raises.
    """
    tool_id = registry.resolve_name(call.tool_name)
    if tool_id is None:
        raise UnknownTool(f"tool not in registry: {call.tool_name}")
    tool = registry.get(tool_id)
    arguments = call.arguments or {}
    problem = validate_arguments(tool.schema, arguments)
    if problem is not None:
        return error_observation(tool_id, problem)
    ctx = ToolContext(
        session_id=ctx.session_id,
        seed=ctx.seed,
        state=ctx.state,
        tokenizer=ctx.tokenizer,
        config=tool.config,
    )
    payload = tool.handler(arguments, ctx)
    success = payload.get("success", True) is not False
    return Observation(payload=payload, success=success, tool_id=tool_id)


# --- deterministic verbose text (cloud responses) ---------------------------

_WORDLIST = (
    "analysis detail result summary option context factor method signal value "
    "pattern review outcome insight record estimate balance update approach "
    "measure source impact range basis model region period degree sample setting"
).split()


@dataclass(frozen=True)
class VerbosityProfile:
    target_tokens: int = 400

    @classmethod
    def named(cls, name: str) -> "VerbosityProfile":
        return {"default": cls(400), "verbose": cls(800)}[name]


def deterministic_text(seed_text: str, target_tokens: int, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> str:
    """Pseudo-random filler text measuring exactly ``target_tokens``.

    Seeded by a hash of ``seed_text`` so identical queries yield identical
    bytes. Words are pure-alphanumeric, so the approximate tokenizer advances
    in fixed steps and the target can be landed exactly (padding with '.').
    """
    if target_tokens <= 0:
        return ""
    seed = int.from_bytes(hashlib.sha256(seed_text.encode("utf-8")).digest()[:8], "big")
    rng = random.Random(seed)
    words = [rng.choice(_WORDLIST)]
    count = tokenizer.count_tokens(words[0])
    step = tokenizer.count_tokens(" x")
    while count + step <= target_tokens:
        words.append(rng.choice(_WORDLIST))
        count += step
    text = " ".join(words)
    while count < target_tokens:
        text += "."
        count += 1
    return text


def cloud_respond(query: str, profile: VerbosityProfile, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> Observation:
    """Verbose cloud answer of the profile's token length, wrapped as success."""
    content = deterministic_text(query, profile.target_tokens, tokenizer)
    return Observation(
        payload={"status": "success", "source": "cloud_llm", "content": content},
        success=True,
        tool_id="process_with_cloud_llm",
    )


# --- built-in handler catalog ----------------------------------------------

def _static_success(args: dict[str, Any], ctx: ToolContext) -> dict[str, Any]:
    """Generic success echoing the action; detail text is a pure function of
    (arguments, session seed). ``detail_noise`` adds seed-dependent length
    jitter so repeat-variance machinery can be exercised deterministically."""
    detail_tokens = int(ctx.config.get("detail_tokens", 24))
    noise = int(ctx.config.get("detail_noise", 0))
    if noise:
        detail_tokens += ctx.seed % (noise + 1)
    key = json.dumps(args, sort_keys=True, ensure_ascii=False)
    payload: dict[str, Any] = {"status": "success"}
    if "action" in args:
        payload["action"] = args["action"]
    if "operation" in args:
        payload["operation"] = args["operation"]
    payload["detail"] = deterministic_text(key, detail_tokens, ctx.tokenizer)
    return payload


def _it_ticket(args: dict[str, Any], ctx: ToolContext) -> dict[str, Any]:
    tickets = ctx.state.setdefault("it_tickets", {})
    action = args.get("action")
    if action == "create":
        ticket_id = f"IT{7390 + 7 * len(tickets)}"
        tickets[ticket_id] = {
            "issue": args.get("issue_description", ""),
            "status": "open",
            "priority": args.get("priority", "normal"),
        }
        return {"status": "success", "ticket_id": ticket_id, "ticket_status": "open"}
    if action == "check_ticket_status":
        ticket_id = args.get("ticket_id")
        if ticket_id not in tickets:
            return {"error": f"no ticket found with id {ticket_id}", "success": False}
        return {"status": "success", "ticket_id": ticket_id, "ticket_status": tickets[ticket_id]["status"]}
    if action == "close":
        ticket_id = args.get("ticket_id")
        if ticket_id not in tickets:
            return {"error": f"no ticket found with id {ticket_id}", "success": False}
        tickets[ticket_id]["status"] = "closed"
        return {"status": "success", "ticket_id": ticket_id, "ticket_status": "closed"}
    return {"error": f"unsupported action: {action}", "success": False}


_FILE_OPS = {
    "search_files": {"path_or_search_query", "file_type_filter_for_search", "content_keywords"},
    "list_directory": {"path_or_search_query"},
    "rename_file": {"path_or_search_query", "new_name_or_destination_path"},
    "move_file": {"path_or_search_query", "new_name_or_destination_path"},
    "delete_file": {"path_or_search_query"},
}


def _device_files(args: dict[str, Any], ctx: ToolContext) -> dict[str, Any]:
    operation = args.get("operation")
    if operation not in _FILE_OPS:
        return {"error": f"unsupported operation: {operation}", "success": False}
    applicable = _FILE_OPS[operation] | {"operation"}
    for key in args:
        if key not in applicable:
            return {
                "error": (
                    f"Invalid request. The '{key}' parameter is not applicable "
                    f"for '{operation}'. Applicable parameters: {sorted(applicable - {'operation'})}."
                ),
                "success": False,
            }
    if operation == "search_files":
        query = args.get("path_or_search_query", "")
        ext = args.get("file_type_filter_for_search", "txt")
        rng = random.Random(ctx.seed ^ len(query))
        files = [f"{query.rstrip('/')}/{name}_{rng.randrange(10, 99)}.{ext}" for name in ("report", "draft", "notes")]
        return {"status": "success", "operation": operation, "matches": files}
    return {"status": "success", "operation": operation}


def _timer(args: dict[str, Any], ctx: ToolContext) -> dict[str, Any]:
    timers = ctx.state.setdefault("timers", [])
    timers.append({"duration_seconds": args["duration_seconds"], "name": args.get("timer_name", "")})
    return {
        "status": "success",
        "timer_id": f"timer_{len(timers)}",
        "duration_seconds": args["duration_seconds"],
    }


def _network_settings(args: dict[str, Any], ctx: ToolContext) -> dict[str, Any]:
    action = args.get("action", "")
    toggles = ctx.state.setdefault("network", {})
    if action.startswith("toggle_"):
        feature = action.removeprefix("toggle_")
        new_state = "disabled" if toggles.get(feature, "enabled") == "enabled" else "enabled"
        toggles[feature] = new_state
        return {"status": "success", "action": action, "new_state": new_state}
    if action.startswith(("enable_", "disable_")):
        verb, _, feature = action.partition("_")
        toggles[feature] = "enabled" if verb == "enable" else "disabled"
        return {"status": "success", "action": action, "new_state": toggles[feature]}
    return {"error": f"unsupported action: {action}", "success": False}


def _cloud_llm(args: dict[str, Any], ctx: ToolContext) -> dict[str, Any]:
    profile = VerbosityProfile(int(ctx.config.get("target_tokens", 400)))
    obs = cloud_respond(args.get("user_query_context", ""), profile, ctx.tokenizer)
    return obs.payload


HANDLER_CATALOG: dict[str, ToolHandler] = {
    "static_success": _static_success,
    "it_ticket": _it_ticket,
    "device_files": _device_files,
    "timer": _timer,
    "network_settings": _network_settings,
    "cloud_llm": _cloud_llm,
}


def load_registry(manifest_path: str | Path, registry_id: str | None = None) -> ToolRegistry:
    """Load a registry from a manifest: {id, cloud_tool_id, tools: [{id, file, handler, config}]}.

    Schema files are resolved relative to the manifest and may hold one schema
    or an array (in which case the entry's id must match one schema's name).
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)
    registry = ToolRegistry(
        registry_id or manifest.get("id", manifest_path.stem),
        cloud_tool_id=manifest["cloud_tool_id"],
    )
    for entry in manifest["tools"]:
        with open(manifest_path.parent / entry["file"], encoding="utf-8") as f:
            raw = json.load(f)
        if isinstance(raw, list):
            matches = [r for r in raw if _schema_name(r) == entry["id"]]
            if not matches:
                raise ValueError(f"no schema named {entry['id']!r} in {entry['file']}")
            raw = matches[0]
        schema = parse_tool_schema(raw, tool_id=entry["id"])
        handler = HANDLER_CATALOG[entry.get("handler", "static_success")]
        registry.add(schema, handler, entry.get("config"))
    return registry.finalize()


def _schema_name(raw: dict[str, Any]) -> str | None:
    fn = raw.get("function", raw) if isinstance(raw, dict) else {}
    return fn.get("name")
