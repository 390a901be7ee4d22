"""Approximate tokenizer shared by the cache ledger, prompt builder and eval
harness.

Counting rule: one token per maximal run of ASCII alphanumerics, one token
per every other character (punctuation, whitespace and non-ASCII each count
individually). This is deliberately crude — it is a stand-in for a real BPE
tokenizer — but it is deterministic, cheap, and preserves the ratios the
runtime cares about (minified vs pretty-printed schemas, name banks vs full
schema blocks). Charging for whitespace is what makes whitespace removal
measurable at all.

Two implementations exist: a compiled extension (``_kernel``, built from
Cython) and a pure-Python fallback. The fastest available one is selected at
import time; both are importable for cross-checking and benchmarks.

Counting is local: concatenation can only merge one alphanumeric run at the
boundary, so ``count(a + b) == count(a) + count(b) - merge(a, b)`` with
``merge`` in {0, 1}. The runtime uses this for exact incremental ledger
arithmetic instead of rescanning ever-growing prompts.
"""

from __future__ import annotations

from typing import Callable, Protocol

from . import _fallback

try:
    from . import _kernel  # type: ignore[attr-defined]
except ImportError:
    _kernel = None

if _kernel is not None:
    count_tokens = _kernel.count_tokens
    ACTIVE_IMPL = "kernel"
else:
    count_tokens = _fallback.count_tokens
    ACTIVE_IMPL = "fallback"


def _is_alnum(ch: str) -> bool:
    return ("0" <= ch <= "9") or ("A" <= ch <= "Z") or ("a" <= ch <= "z")


def boundary_merge(left: str, right: str) -> int:
    """1 if appending ``right`` to ``left`` merges two alphanumeric runs."""
    if not left or not right:
        return 0
    return 1 if _is_alnum(left[-1]) and _is_alnum(right[0]) else 0


def concat_count(left_count: int, left: str, right: str) -> int:
    """Token count of ``left + right`` given the precomputed count of left."""
    return left_count + count_tokens(right) - boundary_merge(left, right)


class Tokenizer(Protocol):
    """Anything that can count tokens deterministically."""

    def count_tokens(self, text: str) -> int: ...


class ApproxTokenizer:
    """Default tokenizer backed by the selected counting implementation."""

    name = f"approx:{ACTIVE_IMPL}"

    def count_tokens(self, text: str) -> int:
        return count_tokens(text)


class CallableTokenizer:
    """Adapter wrapping an arbitrary counting function (e.g. a real BPE)."""

    def __init__(self, fn: Callable[[str], int], name: str = "custom"):
        self._fn = fn
        self.name = name

    def count_tokens(self, text: str) -> int:
        return self._fn(text)


DEFAULT_TOKENIZER = ApproxTokenizer()
