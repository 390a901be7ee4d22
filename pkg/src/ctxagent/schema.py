"""Tool schema parsing, canonical minification, and prompt token budgets.

A tool definition enters as OpenAPI-style function-calling JSON (either the
``{"type": "function", "function": {...}}`` envelope or a bare function
object), keeps only the fields needed for invocation (name, description,
parameters), and serializes back out as a single-line canonical form with no
insignificant whitespace. The canonical form is byte-stable: identical input
always yields identical bytes, so it can sit in a cached prompt prefix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable

from .errors import DuplicateToolId, MalformedParameters, MissingField
from .tokenizer import DEFAULT_TOKENIZER, Tokenizer

JsonObject = dict[str, Any]


@dataclass(frozen=True)
class ToolSchema:
    """Parsed function definition: just enough to select and call the tool."""

    id: str
    name: str
    description: str
    parameters: JsonObject = field(default_factory=dict)

    def __post_init__(self):
        if not self.name:
            raise MissingField("name")
        if any(c.isspace() for c in self.name):
            raise MalformedParameters(f"tool name contains whitespace: {self.name!r}")
        _validate_parameters(self.parameters)

    def required_params(self) -> list[str]:
        return list(self.parameters.get("required", []))

    def properties(self) -> JsonObject:
        return self.parameters.get("properties", {})


@dataclass(frozen=True)
class CompactSchema:
    """Single-line canonical serialization of a ToolSchema."""

    text: str
    source_id: str
    byte_len: int
    token_len: int


@dataclass(frozen=True)
class ToolCard:
    """Name + short description, the unit of the lightweight tool bank."""

    id: str
    name: str
    description: str


def _validate_parameters(params: JsonObject) -> None:
    if not isinstance(params, dict):
        raise MalformedParameters(f"parameters must be an object, got {type(params).__name__}")
    if params and params.get("type") not in (None, "object"):
        raise MalformedParameters(f"parameters must describe an object, got type={params.get('type')!r}")
    props = params.get("properties", {})
    if not isinstance(props, dict):
        raise MalformedParameters("parameters.properties must be an object")
    for req in params.get("required", []):
        if req not in props:
            raise MalformedParameters(f"required parameter {req!r} is not a declared property")


def parse_tool_schema(raw: Any, tool_id: str | None = None) -> ToolSchema:
    """Parse a function schema, dropping everything but name/description/parameters.

    Accepts the ``{"type": "function", "function": {...}}`` envelope or a bare
    function object. Vendor extensions, examples, deprecation flags etc. are
    discarded.
    """
    if not isinstance(raw, dict):
        raise MalformedParameters("schema must be a JSON object")
    fn = raw.get("function") if raw.get("type") == "function" and isinstance(raw.get("function"), dict) else raw
    name = fn.get("name")
    if not name or not isinstance(name, str):
        raise MissingField("name")
    description = fn.get("description", "")
    if not isinstance(description, str):
        raise MalformedParameters("description must be a string")
    parameters = fn.get("parameters", {})
    if parameters is None:
        parameters = {}
    if not isinstance(parameters, dict):
        raise MalformedParameters("parameters must be an object schema")
    return ToolSchema(id=tool_id or name, name=name, description=description, parameters=parameters)


def _canonical_object(s: ToolSchema) -> JsonObject:
    # Fixed key order: type, function; then name, description, parameters.
    # Property keys keep source order (dicts preserve insertion order).
    return {
        "type": "function",
        "function": {
            "name": s.name,
            "description": s.description,
            "parameters": s.parameters,
        },
    }


def minify(s: ToolSchema, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> CompactSchema:
    """Serialize to the canonical single-line form and measure it."""
    text = json.dumps(_canonical_object(s), separators=(",", ":"), ensure_ascii=False)
    return CompactSchema(
        text=text,
        source_id=s.id,
        byte_len=len(text.encode("utf-8")),
        token_len=tokenizer.count_tokens(text),
    )


def standard_text(s: ToolSchema) -> str:
    """The conventional human-oriented rendering: 2-space pretty-printed JSON."""
    return json.dumps(_canonical_object(s), indent=2, ensure_ascii=False)


def parse_compact(text: str, tool_id: str | None = None) -> ToolSchema:
    """Inverse of :func:`minify` (round-trips name/description/parameters)."""
    return parse_tool_schema(json.loads(text), tool_id=tool_id)


def tool_card(s: ToolSchema, max_description_len: int | None = None) -> ToolCard:
    desc = s.description
    if max_description_len is not None and len(desc) > max_description_len:
        desc = desc[:max_description_len]
    return ToolCard(id=s.id, name=s.name, description=desc)


def tool_bank_text(cards: Iterable[ToolCard]) -> str:
    """One "name: description" line per tool, in registry order."""
    cards = list(cards)
    if not cards:
        raise ValueError("tool bank requires at least one tool")
    seen: set[str] = set()
    for c in cards:
        if c.id in seen:
            raise DuplicateToolId(f"duplicate tool id in bank: {c.id}")
        seen.add(c.id)
    return "\n".join(f"{c.name}: {c.description}" for c in cards)


FULL_STANDARD = "full-standard"
FULL_COMPACT = "full-compact"
NAMES_ONLY = "names-only"
BUDGET_MODES = (FULL_STANDARD, FULL_COMPACT, NAMES_ONLY)


@dataclass(frozen=True)
class TokenBudgetReport:
    """Per-tool and total token cost of one prompt-construction mode."""

    mode: str
    per_tool: list[dict[str, Any]]
    total_tokens: int
    tokenizer_name: str

    def to_json(self) -> JsonObject:
        return {
            "mode": self.mode,
            "tokenizer": self.tokenizer_name,
            "total_tokens": self.total_tokens,
            "per_tool": self.per_tool,
        }

    def to_table(self) -> str:
        width = max([len("tool")] + [len(r["name"]) for r in self.per_tool])
        lines = [f"{'tool'.ljust(width)}  tokens", f"{'-' * width}  ------"]
        for r in self.per_tool:
            lines.append(f"{r['name'].ljust(width)}  {r['tokens']:>6}")
        lines.append(f"{'total'.ljust(width)}  {self.total_tokens:>6}")
        return "\n".join(lines)


def registry_budget(
    schemas: list[ToolSchema],
    mode: str,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
) -> TokenBudgetReport:
    """Token cost of presenting the registry to the model in the given mode."""
    if not schemas:
        raise ValueError("registry budget requires at least one schema")
    if mode not in BUDGET_MODES:
        raise ValueError(f"unknown budget mode: {mode!r} (expected one of {BUDGET_MODES})")

    per_tool = []
    if mode == NAMES_ONLY:
        cards = [tool_card(s) for s in schemas]
        for c in cards:
            per_tool.append({"id": c.id, "name": c.name, "tokens": tokenizer.count_tokens(f"{c.name}: {c.description}")})
        total = tokenizer.count_tokens(tool_bank_text(cards))
    else:
        render = standard_text if mode == FULL_STANDARD else (lambda s: minify(s, tokenizer).text)
        texts = [render(s) for s in schemas]
        for s, t in zip(schemas, texts):
            per_tool.append({"id": s.id, "name": s.name, "tokens": tokenizer.count_tokens(t)})
        total = tokenizer.count_tokens("\n".join(texts))
    return TokenBudgetReport(mode=mode, per_tool=per_tool, total_tokens=total, tokenizer_name=getattr(tokenizer, "name", "custom"))
