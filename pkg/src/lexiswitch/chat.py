"""Chat-completion providers: an OpenAI-compatible HTTP client and a
scripted stand-in for offline runs and tests.

Scripted provider
-----------------
The script is a JSON object. Requests are classified by their shape and
answered from the matching section:

``baseline``
    System prompt is the baseline prompt. Keyed by the last user message.
``zero_shot``
    System prompt is the zero-shot prompt. Keyed by the last user message;
    behaviors ``paraphrase`` and ``echo`` start from the ``baseline`` reply.
``rewrite``
    A user message carrying ``<TARGET>...</TARGET>``. Keyed by the target
    text; behaviors ``substitute``, ``echo`` and ``paraphrase``.

A section is either a behavior name or a mapping from key to reply, where
the key ``"*"`` names the fallback behavior. ``fingerprints`` maps the
SHA-256 request fingerprint (see :func:`request_fingerprint`) to a reply
and takes precedence over everything else.
"""

from __future__ import annotations

import ast
import hashlib
import json
import logging
import math
import random
import re
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Protocol, Sequence

import httpx

from .embedding import post_json_with_retry
from .errors import EmptyCompletion, MissingFile, ParseError, ProviderError
from .extraction import tokenize
from .prompts import (
    BASELINE_SYSTEM_PROMPT,
    QUERY_MARKER,
    TARGET_CLOSE,
    TARGET_OPEN,
    ZERO_SHOT_SYSTEM_PROMPT,
)

log = logging.getLogger(__name__)

Message = Mapping[str, str]


@dataclass(frozen=True)
class ChatProviderConfig:
    kind: Literal["remote", "scripted"] = "scripted"
    endpoint: str | None = None
    model_name: str = "gpt-4o-mini"
    temperature: float = 0.0
    timeout: float = 60.0
    script: dict | None = field(default=None, hash=False, compare=False)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("remote", "scripted"):
            raise ValueError(f"unknown chat provider kind: {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote chat provider requires an endpoint")
        if self.kind == "scripted" and self.script is None:
            raise ValueError("scripted chat provider requires a script")

    def describe(self) -> dict:
        return {"kind": self.kind, "model_name": self.model_name, "temperature": self.temperature}


class ChatProvider(Protocol):
    def complete(self, messages: Sequence[Message]) -> str: ...


def request_fingerprint(model: str, messages: Sequence[Message], temperature: float) -> str:
    payload = {
        "model": model,
        "messages": [{"role": m["role"], "content": m["content"]} for m in messages],
        "temperature": temperature,
    }
    blob = json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class RemoteChatProvider:
    """``POST {endpoint}/chat/completions``; reply at ``choices[0].message.content``."""

    def __init__(self, cfg: ChatProviderConfig, transport: httpx.BaseTransport | None = None,
                 sleep=time.sleep):
        if not cfg.endpoint:
            raise ValueError("remote chat provider requires an endpoint")
        self.cfg = cfg
        self.url = cfg.endpoint.rstrip("/") + "/chat/completions"
        self._transport = transport
        self._sleep = sleep

    def complete(self, messages: Sequence[Message]) -> str:
        payload = {
            "model": self.cfg.model_name,
            "messages": [{"role": m["role"], "content": m["content"]} for m in messages],
            "temperature": self.cfg.temperature,
        }
        with httpx.Client(timeout=self.cfg.timeout, transport=self._transport) as client:
            body = post_json_with_retry(client, self.url, payload, sleep=self._sleep)
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ProviderError(200, f"malformed chat reply: {str(body)[:200]}") from None
        if not isinstance(content, str) or not content.strip():
            raise EmptyCompletion("provider returned an empty completion")
        return content.strip()


# -- scripted behaviors ----------------------------------------------------

_FILLERS = (
    "basically", "honestly", "stuff", "folks", "truly", "kinda", "whole", "somehow",
    "probably", "totally", "definitely", "quite", "simply", "actually", "certainly",
    "everything", "situation", "matter", "moment", "people",
)


def extract_target(text: str) -> str | None:
    """Text inside the last <TARGET>...</TARGET> pair, if any."""
    end = text.rfind(TARGET_CLOSE)
    if end < 0:
        return None
    start = text.rfind(TARGET_OPEN, 0, end)
    if start < 0:
        return None
    return text[start + len(TARGET_OPEN) : end]


def extract_dictionary(text: str) -> list[dict]:
    """Cue records from the query part of a rewrite prompt."""
    tail = text[text.rfind(QUERY_MARKER) :] if QUERY_MARKER in text else text
    match = re.search(r"^Dictionary: (.*)$", tail, flags=re.MULTILINE)
    if not match:
        return []
    raw = match.group(1)
    try:
        records = json.loads(raw)
    except json.JSONDecodeError:
        try:
            records = ast.literal_eval(raw)
        except (ValueError, SyntaxError):
            return []
    return [r for r in records if isinstance(r, dict)]


def _match_case(replacement: str, original: str) -> str:
    if original[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def substitute_first_cue(target: str, cues: Sequence[dict]) -> str:
    """Replace the first cue token found in ``target`` with its dialect word."""
    for cue in cues:
        token, word = cue.get("token"), cue.get("word")
        if not token or not word:
            continue
        pattern = re.compile(r"(?<!\w)" + re.escape(token) + r"(?!\w)", re.IGNORECASE)
        found = pattern.search(target)
        if found:
            return target[: found.start()] + _match_case(word, found.group(0)) + target[found.end() :]
    return target


def paraphrase(text: str, seed: int = 0) -> str:
    """Deterministic stand-in for free paraphrasing.

    Moves the first clause to the end and swaps at least 40% of word tokens
    for filler words.
    """
    tokens = tokenize(text)
    clauses: list[list[str]] = [[]]
    for tok in tokens:
        clauses[-1].append(tok.surface)
        if tok.surface in {",", ";", ".", "!", "?"}:
            clauses.append([])
    clauses = [c for c in clauses if c]
    if len(clauses) > 1:
        clauses = clauses[1:] + clauses[:1]
    words = [w for c in clauses for w in c]
    rng = random.Random(seed * 1_000_003 + zlib.crc32(text.encode("utf-8")))
    positions = [i for i, w in enumerate(words) if any(ch.isalpha() for ch in w)]
    n_swap = math.ceil(0.4 * len(positions))
    for i in sorted(rng.sample(positions, n_swap)):
        choices = [f for f in _FILLERS if f != words[i].lower()]
        words[i] = rng.choice(choices)
    out = ""
    for w in words:
        if out and not (len(w) == 1 and w in ",;.!?") and not w.startswith(("'", "’")) \
                and w.lower() not in ("n't", "n’t"):
            out += " "
        out += w
    return out[:1].upper() + out[1:]


class ScriptedChatProvider:
    """Replays canned replies; see the module docstring for the script format."""

    def __init__(self, script: dict, *, model_name: str = "scripted", temperature: float = 0.0,
                 seed: int = 0):
        self.script = script
        self.model_name = model_name
        self.temperature = temperature
        self.seed = seed
        self.calls: list[list[dict]] = []

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> ScriptedChatProvider:
        path = Path(path)
        if not path.is_file():
            raise MissingFile(path)
        try:
            script = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.lineno, f"invalid script JSON: {exc.msg}", str(path)) from None
        return cls(script, **kwargs)

    def _section(self, name: str) -> dict:
        section = self.script.get(name, {})
        if isinstance(section, str):
            return {"*": section}
        return dict(section)

    def _lookup(self, name: str, key: str) -> tuple[str | None, str | None]:
        section = self._section(name)
        if key in section:
            return section[key], None
        return None, section.get("*")

    def _baseline_reply(self, user_text: str) -> str:
        reply, behavior = self._lookup("baseline", user_text)
        if reply is not None:
            return reply
        if behavior == "echo":
            return user_text
        raise ProviderError(404, f"no scripted baseline reply for {user_text[:60]!r}")

    def _answer(self, messages: Sequence[Message]) -> str:
        fingerprints = self.script.get("fingerprints", {})
        fp = request_fingerprint(self.model_name, messages, self.temperature)
        if fp in fingerprints:
            return fingerprints[fp]

        system = next((m["content"] for m in messages if m["role"] == "system"), None)
        user_text = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")
        target = extract_target(user_text)

        if target is not None:
            reply, behavior = self._lookup("rewrite", target)
            if reply is not None:
                return reply
            if behavior == "substitute":
                return substitute_first_cue(target, extract_dictionary(user_text))
            if behavior == "echo":
                return target
            if behavior == "paraphrase":
                return paraphrase(target, self.seed)
            if behavior == "empty":
                return ""
            raise ProviderError(404, f"no scripted rewrite for {target[:60]!r}")

        if system == ZERO_SHOT_SYSTEM_PROMPT:
            reply, behavior = self._lookup("zero_shot", user_text)
            if reply is not None:
                return reply
            if behavior == "paraphrase":
                return paraphrase(self._baseline_reply(user_text), self.seed)
            if behavior == "echo":
                return self._baseline_reply(user_text)
            if behavior == "empty":
                return ""
            raise ProviderError(404, f"no scripted zero-shot reply for {user_text[:60]!r}")

        if system not in (None, BASELINE_SYSTEM_PROMPT):
            log.debug("unrecognized system prompt; answering as baseline")
        reply, behavior = self._lookup("baseline", user_text)
        if reply is None and behavior == "empty":
            return ""
        return self._baseline_reply(user_text)

    def complete(self, messages: Sequence[Message]) -> str:
        self.calls.append([dict(m) for m in messages])
        reply = self._answer(messages)
        if not reply or not reply.strip():
            raise EmptyCompletion("scripted provider produced an empty completion")
        return reply


def make_chat_provider(cfg: ChatProviderConfig,
                       transport: httpx.BaseTransport | None = None) -> ChatProvider:
    if cfg.kind == "scripted":
        return ScriptedChatProvider(cfg.script or {}, model_name=cfg.model_name,
                                    temperature=cfg.temperature, seed=cfg.seed)
    return RemoteChatProvider(cfg, transport=transport)
