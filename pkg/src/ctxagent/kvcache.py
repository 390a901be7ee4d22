"""Token-count ledger for the two adapter channels' prompt caches.

This models the permanent/ephemeral split of a prefix cache as plain text
plus exact token arithmetic — not tensors. The permanent region (system
text, tool block, committed state-log lines) survives across turns and only
ever grows; the ephemeral region (the current conversational turn) is
discarded by ``rewind`` before the next turn. A real inference server can
consume the ledger as prefix-caching hints; the scripted runtime uses it as
the source of truth for context accounting.

``full_prompt_text`` must equal, byte for byte, what a stateless prompt
builder would produce from (base prompt, committed deltas, current
ephemeral text). That replay equivalence is the module's core correctness
oracle and is enforced by the test suite over random event sequences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .errors import AlreadyPrimed, NotPrimed
from .tokenizer import DEFAULT_TOKENIZER, Tokenizer, boundary_merge, concat_count

EXECUTOR = "executor"
TRACKER = "tracker"
ADAPTERS = (EXECUTOR, TRACKER)

PRIME = "prime"
EXTEND_EPHEMERAL = "extend_ephemeral"
REWIND = "rewind"
COMMIT_DELTA = "commit_delta"


@dataclass(frozen=True)
class CacheEvent:
    kind: str
    delta_tokens: int
    turn_index: int

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "deltaTokens": self.delta_tokens, "turnIndex": self.turn_index}


class CacheState:
    """Per-adapter cache ledger. Mutations are serialized by the owning session."""

    def __init__(self, adapter_id: str, tokenizer: Tokenizer = DEFAULT_TOKENIZER):
        if adapter_id not in ADAPTERS:
            raise ValueError(f"unknown adapter id: {adapter_id!r}")
        self.adapter_id = adapter_id
        self.tokenizer = tokenizer
        self.permanent_text = ""
        self.permanent_len = 0
        self.ephemeral_text = ""
        self.ephemeral_len = 0
        self.history: list[CacheEvent] = []
        self.committed_deltas: list[str] = []
        self._primed = False

    @property
    def primed(self) -> bool:
        return self._primed

    def _require_primed(self):
        if not self._primed:
            raise NotPrimed(f"{self.adapter_id} cache used before priming")

    def prime(self, base_prompt: str, turn_index: int = 0) -> "CacheState":
        """Install the base prompt as the initial permanent region. Once only."""
        if self._primed:
            raise AlreadyPrimed(f"{self.adapter_id} cache primed twice")
        if not base_prompt:
            raise ValueError("base prompt must be non-empty")
        self._primed = True
        self.permanent_text = base_prompt
        self.permanent_len = self.tokenizer.count_tokens(base_prompt)
        self.history.append(CacheEvent(PRIME, self.permanent_len, turn_index))
        return self

    def extend_ephemeral(self, text: str, turn_index: int = 0) -> "CacheState":
        """Append conversational text to the ephemeral region."""
        self._require_primed()
        if not text:
            return self
        new_len = concat_count(self.ephemeral_len, self.ephemeral_text, text)
        self.history.append(CacheEvent(EXTEND_EPHEMERAL, new_len - self.ephemeral_len, turn_index))
        self.ephemeral_text += text
        self.ephemeral_len = new_len
        return self

    def rewind(self, turn_index: int = 0) -> "CacheState":
        """Discard the ephemeral region. Idempotent; no-op records no event."""
        self._require_primed()
        if self.ephemeral_len == 0 and not self.ephemeral_text:
            return self
        self.history.append(CacheEvent(REWIND, self.ephemeral_len, turn_index))
        self.ephemeral_text = ""
        self.ephemeral_len = 0
        return self

    def commit_delta(self, delta_text: str, turn_index: int = 0) -> "CacheState":
        """Append a state-log delta to the permanent region.

        The delta conventionally starts with its own "\\n" separator (see
        StateDelta.rendered), keeping the permanent text identical to what a
        from-scratch render of the log would produce.
        """
        self._require_primed()
        if not delta_text:
            return self
        new_len = concat_count(self.permanent_len, self.permanent_text, delta_text)
        self.history.append(CacheEvent(COMMIT_DELTA, new_len - self.permanent_len, turn_index))
        self.permanent_text += delta_text
        self.permanent_len = new_len
        self.committed_deltas.append(delta_text)
        return self

    def full_prompt_text(self) -> str:
        """Exact byte sequence the backend must receive for the next generation."""
        self._require_primed()
        return self.permanent_text + self.ephemeral_text

    def full_prompt_len(self) -> int:
        self._require_primed()
        return self.permanent_len + self.ephemeral_len - boundary_merge(self.permanent_text, self.ephemeral_text)

    def base_prompt(self) -> str:
        """The original primed prompt (permanent text minus committed deltas)."""
        self._require_primed()
        committed = sum(len(d) for d in self.committed_deltas)
        return self.permanent_text[: len(self.permanent_text) - committed]

    def snapshot(self) -> dict[str, Any]:
        return {
            "adapterId": self.adapter_id,
            "permanentLen": self.permanent_len,
            "ephemeralLen": self.ephemeral_len,
            "history": [e.to_json() for e in self.history],
        }


def rebuild_prompt(base_prompt: str, committed_deltas: list[str], ephemeral_text: str) -> str:
    """Stateless from-scratch prompt render, the ledger's replay oracle."""
    return base_prompt + "".join(committed_deltas) + ephemeral_text
