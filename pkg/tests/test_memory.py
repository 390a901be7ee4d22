"""Append-only state log and tracker-output parsing."""

import pytest
from hypothesis import given, strategies as st

from ctxagent.errors import BackendFailure, EmptyOutput, NonMonotoneTurn
from ctxagent.kvcache import TRACKER, CacheState
from ctxagent.memory import (
    NO_UPDATE_SENTINEL,
    PRIMING_LINE,
    ContextState,
    StateDelta,
    StateEntry,
    apply_delta,
    parse_tracker_output,
    run_tracker_turn,
    tracker_base_prompt,
)
from ctxagent.turns import Turn


def _delta(*lines):
    return StateDelta(lines=tuple(lines))


class TestApplyDelta:
    def test_first_update(self):
        state = ContextState()
        assert state.text == PRIMING_LINE
        delta = _delta("user_goal: create_it_ticket", "ticket_details:", "  - issue: wifi_not_working")
        new = apply_delta(state, delta, turn_index=1)
        assert new.text == (
            PRIMING_LINE
            + "\nuser_goal: create_it_ticket\nticket_details:\n  - issue: wifi_not_working"
        )
        assert new.version == 1

    def test_no_update_is_identity(self):
        state = apply_delta(ContextState(), _delta("a: b"), 1)
        same = apply_delta(state, StateDelta(is_no_update=True), 2)
        assert same is state
        assert same.version == state.version

    def test_single_line_grows_by_len_plus_one(self):
        state = apply_delta(ContextState(), _delta("a: b", "c: d"), 1)
        line = "ticket_id: IT7390"
        grown = apply_delta(state, _delta(line), 2)
        assert len(grown.text.encode()) == len(state.text.encode()) + len(line.encode()) + 1

    def test_non_monotone_turn(self):
        state = apply_delta(ContextState(), _delta("a: b"), 5)
        with pytest.raises(NonMonotoneTurn):
            apply_delta(state, _delta("c: d"), 5)

    def test_empty_delta_is_noop(self):
        state = apply_delta(ContextState(), _delta("a: b"), 1)
        assert apply_delta(state, StateDelta(), 2) is state


class TestStateEntry:
    def test_keyed_line(self):
        e = StateEntry.from_line("user_goal: get analyst predictions", 3)
        assert (e.key, e.value) == ("user_goal", "get analyst predictions")

    def test_free_text_line(self):
        for line in ("  - issue: wifi_not_working", "ticket_details:", "Note without key", "UPPER: x"):
            e = StateEntry.from_line(line, 1)
            assert e.key is None and e.value is None
            assert e.raw_line == line


class TestParseTrackerOutput:
    def test_sentinel(self):
        assert parse_tracker_output("# NO_UPDATE").is_no_update
        assert parse_tracker_output("  # NO_UPDATE \n").is_no_update

    def test_sentinel_requires_space(self):
        delta = parse_tracker_output("#NO_UPDATE")
        assert not delta.is_no_update
        assert delta.lines == ("#NO_UPDATE",)

    def test_single_line(self):
        assert parse_tracker_output("completed_steps: wifi disabled\n").lines == (
            "completed_steps: wifi disabled",
        )

    def test_whitespace_only_is_error(self):
        with pytest.raises(EmptyOutput):
            parse_tracker_output("   \n ")

    def test_dedup_against_current_log(self):
        state = apply_delta(ContextState(), _delta("user_goal: x"), 1)
        delta = parse_tracker_output("user_goal: x", state)
        assert not delta.is_no_update and delta.is_empty
        assert apply_delta(state, delta, 2).text == state.text

    def test_blank_and_sentinel_lines_dropped(self):
        delta = parse_tracker_output("a: 1\n\n# NO_UPDATE\nb: 2\n")
        assert delta.lines == ("a: 1", "b: 2")

    def test_delta_invariants(self):
        with pytest.raises(ValueError):
            StateDelta(lines=("x",), is_no_update=True)
        with pytest.raises(ValueError):
            StateDelta(lines=(NO_UPDATE_SENTINEL,))


@given(st.lists(st.lists(st.text(alphabet=st.characters(blacklist_characters="\n"), min_size=1), min_size=0, max_size=3), max_size=8))
def test_append_only_prefix_property(all_lines):
    state = ContextState()
    turn = 0
    for lines in all_lines:
        turn += 1
        lines = [l for l in lines if l.strip() and l.strip() != NO_UPDATE_SENTINEL]
        before = state.text
        state = apply_delta(state, StateDelta(lines=tuple(lines)), turn)
        assert state.text.startswith(before)


@given(st.lists(st.lists(st.text(alphabet="abc_: ", min_size=1, max_size=10), min_size=1, max_size=3), max_size=6))
def test_growth_bound_exact(all_lines):
    state = ContextState()
    expected = len(ContextState().text.encode())
    turn = 0
    for lines in all_lines:
        turn += 1
        lines = [l for l in lines if l.strip()]
        if not lines:
            continue
        state = apply_delta(state, StateDelta(lines=tuple(lines)), turn)
        expected += len("\n".join(lines).encode()) + 1
    assert len(state.text.encode()) == expected


def test_determinism_byte_identical():
    deltas = [("a: 1",), ("b: 2", "c: 3"), (), ("d: 4",)]
    results = []
    for _ in range(2):
        state = ContextState()
        for i, lines in enumerate(deltas, 1):
            state = apply_delta(state, StateDelta(lines=lines), i)
        results.append(state.text)
    assert results[0] == results[1]


class _StubBackend:
    def __init__(self, outputs):
        self.outputs = list(outputs)

    def generate(self, prompt, channel):
        out = self.outputs.pop(0)
        if isinstance(out, Exception):
            raise out
        return out


class _StubSession:
    """Just enough session surface for run_tracker_turn."""

    def __init__(self, backend):
        self.backend = backend
        self.state = ContextState()
        self.tracker_cache = CacheState(TRACKER).prime(tracker_base_prompt())
        self.tracker_outputs = []
        self.assistant_turns = 1


def _exchange():
    return [
        Turn(session_id="s", turn_index=0, role="user", kind="user", content="My Wi-Fi is not working"),
        Turn(session_id="s", turn_index=1, role="assistant", kind="tool_call", content="<tool_call>...</tool_call>"),
    ]


class TestRunTrackerTurn:
    def test_applies_scripted_delta(self):
        session = _StubSession(_StubBackend(["user_goal: create_it_ticket"]))
        delta = run_tracker_turn(session, _exchange())
        assert delta.lines == ("user_goal: create_it_ticket",)
        assert "user_goal: create_it_ticket" in session.state.text
        # the tracker saw the exchange rendered into its ephemeral region
        assert "[NEW MESSAGES]" in session.tracker_cache.ephemeral_text
        assert "USER: My Wi-Fi is not working" in session.tracker_cache.ephemeral_text

    def test_no_update_passthrough(self):
        session = _StubSession(_StubBackend(["# NO_UPDATE"]))
        before = session.state
        delta = run_tracker_turn(session, _exchange())
        assert delta.is_no_update
        assert session.state is before

    def test_backend_failure_leaves_state_untouched(self):
        session = _StubSession(_StubBackend([BackendFailure("boom")]))
        before_text = session.state.text
        with pytest.raises(BackendFailure):
            run_tracker_turn(session, _exchange())
        assert session.state.text == before_text

    def test_empty_exchange_rejected(self):
        session = _StubSession(_StubBackend(["x: y"]))
        with pytest.raises(ValueError):
            run_tracker_turn(session, [])
