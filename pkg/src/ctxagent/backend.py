"""Model-backend abstraction: one interface, two logical channels.

The runtime talks to "executor" and "tracker" as independent generation
channels. A live server maps the channel tag to adapter selection; the
scripted backend maps it to script routing. Scripted mode is the test and
eval workhorse: fully deterministic, each step consumed at most once.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import httpx

from .errors import BackendFailure, ChannelMismatch, ScriptExhausted
from .kvcache import ADAPTERS
from .tokenizer import DEFAULT_TOKENIZER, Tokenizer

DEFAULT_STOP_SEQUENCES = ("</tool_call>", "<|im_end|>")


class BackendChannel(Protocol):
    tokenizer: Tokenizer

    def generate(self, prompt: str, channel: str) -> str: ...


@dataclass
class ScriptStep:
    """One canned completion. Matches by substring, regex, or per-channel call index."""

    output: str
    channel: str = "executor"
    contains: str | None = None
    regex: str | None = None
    turn: int | None = None
    consumed: bool = False

    def matches(self, prompt: str, channel_call_index: int) -> bool:
        if self.contains is not None and self.contains not in prompt:
            return False
        if self.regex is not None and re.search(self.regex, prompt) is None:
            return False
        if self.turn is not None and self.turn != channel_call_index:
            return False
        return True

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ScriptStep":
        channel = obj.get("channel", "executor")
        if channel not in ADAPTERS:
            raise ValueError(f"script step has unknown channel: {channel!r}")
        return cls(
            output=obj["output"],
            channel=channel,
            contains=obj.get("contains"),
            regex=obj.get("regex"),
            turn=obj.get("turn"),
        )


@dataclass
class Script:
    steps: list[ScriptStep] = field(default_factory=list)

    @classmethod
    def from_json(cls, data: list[dict[str, Any]]) -> "Script":
        return cls(steps=[ScriptStep.from_json(o) for o in data])

    @classmethod
    def from_file(cls, path: str | Path) -> "Script":
        with open(path, encoding="utf-8") as f:
            return cls.from_json(json.load(f))

    def remaining(self, channel: str | None = None) -> int:
        return sum(
            1 for s in self.steps if not s.consumed and (channel is None or s.channel == channel)
        )


class ScriptedBackend:
    """Deterministic test double: replays a script, recording a transcript."""

    def __init__(self, script: Script, tokenizer: Tokenizer = DEFAULT_TOKENIZER):
        self.script = script
        self.tokenizer = tokenizer
        self.transcript: list[dict[str, str]] = []
        self._calls_per_channel = {a: 0 for a in ADAPTERS}

    def generate(self, prompt: str, channel: str) -> str:
        if channel not in ADAPTERS:
            raise ChannelMismatch(f"unknown channel: {channel!r}")
        call_index = self._calls_per_channel[channel]
        for step in self.script.steps:
            if step.consumed:
                continue
            if not step.matches(prompt, call_index):
                continue
            if step.channel != channel:
                if step.turn is not None:
                    # An index-pinned step matched on the wrong channel: the
                    # script's channel routing is broken, not merely exhausted.
                    raise ChannelMismatch(
                        f"step pinned to call {step.turn} expects channel {step.channel}, got {channel}"
                    )
                continue
            step.consumed = True
            self._calls_per_channel[channel] = call_index + 1
            self.transcript.append({"channel": channel, "prompt": prompt, "output": step.output})
            return step.output
        raise ScriptExhausted(
            f"no unconsumed script step matches {channel} call {call_index} "
            f"({self.script.remaining(channel)} steps left on channel)"
        )


class QueueBackend:
    """Replays pre-recorded outputs per channel in order, ignoring prompts.

    Used by trajectory replay: the recorded assistant and tracker outputs are
    fed back through the same dispatch code path that produced them.
    """

    def __init__(self, outputs: dict[str, list[str]], tokenizer: Tokenizer = DEFAULT_TOKENIZER):
        self._queues = {a: list(outputs.get(a, [])) for a in ADAPTERS}
        self.tokenizer = tokenizer

    def generate(self, prompt: str, channel: str) -> str:
        queue = self._queues.get(channel)
        if queue is None:
            raise ChannelMismatch(f"unknown channel: {channel!r}")
        if not queue:
            raise ScriptExhausted(f"no recorded outputs left for channel {channel}")
        return queue.pop(0)


@dataclass(frozen=True)
class GenParams:
    max_tokens: int = 512
    temperature: float = 0.0
    stop: tuple[str, ...] = DEFAULT_STOP_SEQUENCES


def truncate_at_stop(text: str, stop: tuple[str, ...]) -> str:
    """Cut the completion at the earliest stop sequence. The closing
    tool-call tag is kept because the action parser needs well-formed tags."""
    cut = len(text)
    keep = ""
    for seq in stop:
        idx = text.find(seq)
        if idx != -1 and idx < cut:
            cut = idx
            keep = seq if seq == "</tool_call>" else ""
    return text[:cut] + keep


class HttpBackend:
    """Client for a minimal JSON completion server.

    Wire format: POST {prompt, max_tokens, temperature, stop, adapter} ->
    {"text": ...}. ``api_format="openai"`` switches to an OpenAI-style
    completions payload ({model, prompt, ...} -> choices[0].text) so a
    compatible server works via configuration rather than code changes.
    """

    def __init__(
        self,
        endpoint: str,
        params: GenParams = GenParams(),
        tokenizer: Tokenizer = DEFAULT_TOKENIZER,
        api_format: str = "plain",
        timeout: float = 30.0,
        model: str = "local",
    ):
        self.endpoint = endpoint.rstrip("/")
        self.params = params
        self.tokenizer = tokenizer
        self.api_format = api_format
        self.model = model
        self._client = httpx.Client(timeout=timeout)

    def generate(self, prompt: str, channel: str) -> str:
        if self.api_format == "openai":
            payload = {
                "model": self.model,
                "prompt": prompt,
                "max_tokens": self.params.max_tokens,
                "temperature": self.params.temperature,
                "stop": list(self.params.stop),
                "user": channel,
            }
        else:
            payload = {
                "prompt": prompt,
                "max_tokens": self.params.max_tokens,
                "temperature": self.params.temperature,
                "stop": list(self.params.stop),
                "adapter": channel,
            }
        try:
            resp = self._client.post(self.endpoint, json=payload)
        except httpx.TimeoutException as e:
            raise BackendFailure(f"timeout contacting backend: {e}") from e
        except httpx.HTTPError as e:
            raise BackendFailure(f"transport error contacting backend: {e}") from e
        if resp.status_code != 200:
            raise BackendFailure(f"backend returned HTTP {resp.status_code}")
        try:
            body = resp.json()
            text = body["choices"][0]["text"] if self.api_format == "openai" else body["text"]
        except (KeyError, IndexError, ValueError) as e:
            raise BackendFailure(f"malformed backend response: {e}") from e
        return truncate_at_stop(text, self.params.stop)


def build_backend(spec: str, tokenizer: Tokenizer = DEFAULT_TOKENIZER) -> BackendChannel:
    """Construct a backend from a CLI/env spec string.

    Forms: ``scripted:<script.json>``, ``http:<url>``, ``openai:<url>``.
    """
    kind, _, rest = spec.partition(":")
    if kind == "scripted":
        return ScriptedBackend(Script.from_file(rest), tokenizer=tokenizer)
    if kind in ("http", "https"):
        url = spec if kind == "https" else rest
        return HttpBackend(url, tokenizer=tokenizer)
    if kind == "openai":
        return HttpBackend(rest, tokenizer=tokenizer, api_format="openai")
    raise ValueError(f"unknown backend spec: {spec!r}")
