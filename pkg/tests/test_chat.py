import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexiswitch.chat import (
    ChatProviderConfig,
    RemoteChatProvider,
    ScriptedChatProvider,
    extract_dictionary,
    extract_target,
    make_chat_provider,
    paraphrase,
    request_fingerprint,
    substitute_first_cue,
)
from lexiswitch.embedding import API_KEY_ENV
from lexiswitch.errors import EmptyCompletion, MissingFile, ParseError, ProviderError, ProviderUnavailable
from lexiswitch.extraction import tokenize
from lexiswitch.metrics import token_edit_distance
from lexiswitch.pipeline import DictionaryCue, assemble_rewrite_prompt
from lexiswitch.prompts import BASELINE_SYSTEM_PROMPT, ZERO_SHOT_SYSTEM_PROMPT

MSGS = [{"role": "system", "content": "sys"}, {"role": "user", "content": "hello"}]


def remote(handler, **kw):
    cfg = ChatProviderConfig(kind="remote", endpoint="http://chat.test/v1/", **kw)
    return RemoteChatProvider(cfg, transport=httpx.MockTransport(handler), sleep=lambda s: None)


def answer(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def test_remote_payload(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "sk-chat")
    seen = []

    def handler(request):
        seen.append(request)
        return answer("  hi back \n")

    assert remote(handler, temperature=0.0).complete(MSGS) == "hi back"
    req = seen[0]
    assert str(req.url) == "http://chat.test/v1/chat/completions"
    assert req.headers["authorization"] == "Bearer sk-chat"
    assert json.loads(req.content) == {"model": "gpt-4o-mini", "messages": MSGS, "temperature": 0.0}


def test_remote_retry_and_failures():
    calls = []

    def flaky(request):
        calls.append(1)
        return httpx.Response(500) if len(calls) < 3 else answer("ok")

    assert remote(flaky).complete(MSGS) == "ok"
    assert len(calls) == 3

    def down(request):
        raise httpx.ConnectTimeout("slow")

    with pytest.raises(ProviderUnavailable):
        remote(down).complete(MSGS)
    with pytest.raises(ProviderError):
        remote(lambda r: httpx.Response(200, json={"choices": []})).complete(MSGS)
    with pytest.raises(EmptyCompletion):
        remote(lambda r: answer("   ")).complete(MSGS)


def test_config_invariants():
    with pytest.raises(ValueError):
        ChatProviderConfig(kind="remote")
    with pytest.raises(ValueError):
        ChatProviderConfig(kind="scripted")
    with pytest.raises(ValueError):
        ChatProviderConfig(kind="carrier-pigeon", script={})
    provider = make_chat_provider(ChatProviderConfig(script={"baseline": "echo"}))
    assert isinstance(provider, ScriptedChatProvider)


def test_fingerprint_is_stable_and_sensitive():
    fp = request_fingerprint("m", MSGS, 0.0)
    assert fp == request_fingerprint("m", [dict(m) for m in MSGS], 0.0)
    assert len(fp) == 64
    assert fp != request_fingerprint("m", MSGS, 0.7)
    assert fp != request_fingerprint("other", MSGS, 0.0)


def test_fingerprint_replies_take_precedence():
    fp = request_fingerprint("scripted", MSGS, 0.0)
    chat = ScriptedChatProvider({"fingerprints": {fp: "canned"}, "baseline": "echo"})
    assert chat.complete(MSGS) == "canned"
    assert chat.complete([{"role": "user", "content": "other"}]) == "other"


def test_scripted_sections():
    chat = ScriptedChatProvider({"baseline": {"hi": "Hello there."}, "zero_shot": {"*": "echo"}})
    base = [{"role": "system", "content": BASELINE_SYSTEM_PROMPT}, {"role": "user", "content": "hi"}]
    zero = [{"role": "system", "content": ZERO_SHOT_SYSTEM_PROMPT}, {"role": "user", "content": "hi"}]
    assert chat.complete(base) == "Hello there."
    assert chat.complete(zero) == "Hello there."
    with pytest.raises(ProviderError):
        chat.complete([{"role": "user", "content": "unknown"}])
    with pytest.raises(ProviderError):
        chat.complete([{"role": "user", "content": assemble_rewrite_prompt("x", [])}])
    assert len(chat.calls) == 4


def test_scripted_substitution_through_prompt():
    cues = [DictionaryCue("exhausting", "sian", "bored; tired")]
    prompt = assemble_rewrite_prompt("That is Exhausting, really exhausting.", cues)
    assert extract_target(prompt) == "That is Exhausting, really exhausting."
    assert extract_dictionary(prompt) == [{"token": "exhausting", "word": "sian", "meaning": "bored; tired"}]
    chat = ScriptedChatProvider({"rewrite": "substitute"})
    assert chat.complete([{"role": "user", "content": prompt}]) == "That is Sian, really exhausting."


def test_extract_helpers_on_plain_text():
    assert extract_target("no tags") is None
    assert extract_dictionary("no dictionary") == []
    assert substitute_first_cue("nothing here", [{"token": "x", "word": "y"}]) == "nothing here"


def test_script_files(tmp_path):
    with pytest.raises(MissingFile):
        ScriptedChatProvider.from_file(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{\n oops", encoding="utf-8")
    with pytest.raises(ParseError):
        ScriptedChatProvider.from_file(bad)


_sentence = st.lists(st.sampled_from(["the", "meeting", "ran", "late", ",", "so", "I", "am",
                                      "tired", "today", "."]), min_size=1, max_size=16).map(" ".join)


@settings(max_examples=150, deadline=None)
@given(_sentence, st.integers(0, 5))
def test_paraphrase_properties(text, seed):
    out = paraphrase(text, seed)
    assert out == paraphrase(text, seed)
    n_words = sum(any(ch.isalpha() for ch in t.surface) for t in tokenize(text))
    if n_words:
        # at least 40% of word tokens change, so the edit distance is substantial
        assert token_edit_distance(text, out) >= 0.4 * n_words - 1e-9
