"""Schema parsing, canonical minification, banks and budgets."""

import json

import pytest
from hypothesis import given, settings, strategies as st

from ctxagent.errors import DuplicateToolId, MalformedParameters, MissingField
from ctxagent.schema import (
    FULL_COMPACT,
    FULL_STANDARD,
    NAMES_ONLY,
    ToolCard,
    ToolSchema,
    minify,
    parse_compact,
    parse_tool_schema,
    registry_budget,
    standard_text,
    tool_bank_text,
    tool_card,
)
from ctxagent.tokenizer import count_tokens

SET_TIMER_PRETTY = {
    "type": "function",
    "function": {
        "name": "set_timer",
        "description": "Sets a timer for a specified duration.",
        "parameters": {
            "type": "object",
            "properties": {
                "duration_seconds": {
                    "type": "integer",
                    "description": "The duration of the timer in seconds.",
                },
                "timer_name": {
                    "type": "string",
                    "description": "An optional name for the timer.",
                },
            },
            "required": ["duration_seconds"],
        },
    },
}

SET_TIMER_COMPACT = (
    '{"type":"function","function":{"name":"set_timer","description":"Sets a timer '
    'for a specified duration.","parameters":{"type":"object","properties":'
    '{"duration_seconds":{"type":"integer","description":"The duration of the timer '
    'in seconds."},"timer_name":{"type":"string","description":"An optional name for '
    'the timer."}},"required":["duration_seconds"]}}}'
)


class TestParse:
    def test_set_timer(self):
        s = parse_tool_schema(SET_TIMER_PRETTY)
        assert s.name == "set_timer"
        assert s.description == "Sets a timer for a specified duration."
        assert s.required_params() == ["duration_seconds"]
        assert set(s.properties()) == {"duration_seconds", "timer_name"}

    def test_minimal_without_parameters(self):
        s = parse_tool_schema({"type": "function", "function": {"name": "f", "description": "d"}})
        assert s.parameters == {}

    def test_extra_fields_dropped(self):
        raw = {
            "type": "function",
            "function": {
                "name": "f",
                "description": "d",
                "parameters": {"type": "object", "properties": {}},
                "examples": [{"call": "f()"}],
                "deprecated": True,
                "x-vendor": {"internal": 1},
            },
        }
        expected = ToolSchema(id="f", name="f", description="d", parameters={"type": "object", "properties": {}})
        assert parse_tool_schema(raw) == expected

    def test_bare_function_object(self):
        s = parse_tool_schema({"name": "g", "description": "plain"})
        assert s.name == "g"

    def test_missing_name(self):
        with pytest.raises(MissingField):
            parse_tool_schema({"type": "function", "function": {"description": "d"}})

    def test_malformed_parameters(self):
        with pytest.raises(MalformedParameters):
            parse_tool_schema({"name": "f", "parameters": "not an object"})
        with pytest.raises(MalformedParameters):
            parse_tool_schema({"name": "f", "parameters": {"type": "array"}})
        with pytest.raises(MalformedParameters):
            parse_tool_schema({"name": "f", "parameters": {"type": "object", "properties": {}, "required": ["ghost"]}})

    def test_whitespace_name_rejected(self):
        with pytest.raises(MalformedParameters):
            ToolSchema(id="x", name="bad name", description="")


class TestMinify:
    def test_set_timer_exact_bytes(self):
        s = parse_tool_schema(SET_TIMER_PRETTY)
        compact = minify(s)
        assert compact.text == SET_TIMER_COMPACT
        assert compact.byte_len == len(SET_TIMER_COMPACT.encode("utf-8"))

    def test_no_newlines_or_insignificant_whitespace(self, registry):
        for s in registry.schemas():
            text = minify(s).text
            assert "\n" not in text
            # Re-serializing with tight separators is a fixed point, so any
            # whitespace present lives inside string values only.
            assert json.dumps(json.loads(text), separators=(",", ":"), ensure_ascii=False) == text

    def test_empty_parameters(self):
        s = ToolSchema(id="f", name="f", description="d")
        assert minify(s).text == '{"type":"function","function":{"name":"f","description":"d","parameters":{}}}'

    def test_round_trip_fixture_corpus(self, registry):
        for s in registry.schemas():
            assert parse_compact(minify(s).text, s.id) == s

    def test_idempotence(self, registry):
        for s in registry.schemas():
            once = minify(s).text
            again = minify(parse_compact(once, s.id)).text
            assert once == again

    def test_monotone_reduction(self, registry):
        for s in registry.schemas():
            assert minify(s).token_len <= count_tokens(standard_text(s))

    def test_unknown_keywords_preserved(self):
        params = {
            "type": "object",
            "properties": {"mode": {"type": "string", "enum": ["a", "b"], "default": "a"}},
            "required": ["mode"],
        }
        s = parse_tool_schema({"name": "f", "description": "", "parameters": params})
        assert parse_compact(minify(s).text).parameters == params

    def test_non_ascii_raw_utf8(self):
        s = ToolSchema(id="f", name="f", description="café — résumé")
        assert "café" in minify(s).text
        assert "\\u" not in minify(s).text


# Random valid schemas for fuzz round-trips.
_names = st.text(alphabet="abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=20)
_texts = st.text(min_size=0, max_size=60).filter(lambda s: True)
_prop = st.fixed_dictionaries(
    {"type": st.sampled_from(["string", "integer", "number", "boolean", "array", "object"]),
     "description": _texts}
)


@st.composite
def schemas(draw):
    props = draw(st.dictionaries(_names, _prop, max_size=5))
    required = draw(st.lists(st.sampled_from(sorted(props)) if props else st.nothing(), unique=True, max_size=len(props)))
    return ToolSchema(
        id=draw(_names),
        name=draw(_names),
        description=draw(_texts),
        parameters={"type": "object", "properties": props, "required": required} if props else {},
    )


@given(schemas())
@settings(max_examples=200)
def test_round_trip_random(s):
    assert parse_compact(minify(s).text, s.id) == s


@given(schemas())
@settings(max_examples=200)
def test_monotone_reduction_random(s):
    assert minify(s).token_len <= count_tokens(standard_text(s))


class TestToolBank:
    def test_single_entry(self):
        assert tool_bank_text([ToolCard("t", "Timer", "Sets timers")]) == "Timer: Sets timers"

    def test_order_preserved(self):
        cards = [ToolCard("a", "A", "first"), ToolCard("b", "B", "second")]
        assert tool_bank_text(cards) == "A: first\nB: second"

    def test_duplicate_id(self):
        with pytest.raises(DuplicateToolId):
            tool_bank_text([ToolCard("a", "A", "x"), ToolCard("a", "A2", "y")])

    def test_injective_on_distinct_pairs(self, registry):
        cards = [tool_card(s) for s in registry.schemas()]
        lines = tool_bank_text(cards).split("\n")
        assert len(set(lines)) == len(lines)

    def test_truncation(self):
        s = ToolSchema(id="f", name="f", description="x" * 100)
        assert tool_card(s, max_description_len=10).description == "x" * 10
        assert tool_card(s).description == "x" * 100

    def test_bank_under_quarter_of_compact_12_tools(self, registry):
        schemas12 = registry.schemas()[:12]
        bank = tool_bank_text([tool_card(s) for s in schemas12])
        compact_total = count_tokens("\n".join(minify(s).text for s in schemas12))
        ratio = count_tokens(bank) / compact_total
        assert ratio < 0.25, f"bank/compact ratio {ratio:.3f}"


class TestBudgets:
    def test_compact_below_standard_single_tool(self):
        s = parse_tool_schema(SET_TIMER_PRETTY)
        compact = registry_budget([s], FULL_COMPACT)
        standard = registry_budget([s], FULL_STANDARD)
        assert compact.total_tokens < standard.total_tokens

    def test_fixture_registry_compression(self, registry):
        compact = registry_budget(registry.schemas(), FULL_COMPACT)
        standard = registry_budget(registry.schemas(), FULL_STANDARD)
        ratio = compact.total_tokens / standard.total_tokens
        assert ratio <= 0.70, f"compact/standard ratio {ratio:.3f}"

    def test_names_only_ratio(self, registry):
        names = registry_budget(registry.schemas(), NAMES_ONLY)
        compact = registry_budget(registry.schemas(), FULL_COMPACT)
        ratio = names.total_tokens / compact.total_tokens
        assert ratio <= 0.35, f"names/compact ratio {ratio:.3f}"

    def test_report_shapes(self, registry):
        report = registry_budget(registry.schemas(), FULL_COMPACT)
        assert len(report.per_tool) == len(registry)
        assert report.total_tokens > 0
        assert "total" in report.to_table()
        assert report.to_json()["mode"] == FULL_COMPACT

    def test_bad_mode(self, registry):
        with pytest.raises(ValueError):
            registry_budget(registry.schemas(), "bogus")
