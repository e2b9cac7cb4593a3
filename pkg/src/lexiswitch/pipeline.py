"""Retrieval-augmented rewrite pipeline and its two comparison conditions.

Flow for the ``rag`` condition: base response in Standard English ->
content words -> nearest lexicon entries -> rewrite prompt with the
retrieved cues -> final response. ``baseline`` stops after the base
response; ``zero_shot`` asks the model to answer in the target variety
directly with no lexicon.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Literal, Sequence

from .ann_index import HnswIndex
from .chat import ChatProvider, Message
from .embedding import Embedder
from .errors import ChecksumMismatch, DimensionMismatch, EmptyCompletion
from .extraction import (
    DEFAULT_STOPLIST,
    BaselineTagger,
    PosTagger,
    Token,
    extract_content_words,
    split_sentences,
    tokenize,
)
from .lexicon import Lexicon
from .metrics import align, changed_spans
from .prompts import (
    BASELINE_SYSTEM_PROMPT,
    PROMPTS_VERSION,
    REWRITE_TEMPLATE,
    ZERO_SHOT_SYSTEM_PROMPT,
)

Mode = Literal["baseline", "rag", "zero_shot"]
MODES = ("baseline", "rag", "zero_shot")


@dataclass(frozen=True)
class VarietyConfig:
    name: str = "Singlish"
    particle_blocklist: frozenset[str] = frozenset({"la", "lor", "leh"})
    max_substitutions_per_sentence: int = 1
    min_retrieval_score: float = 0.35
    k_per_word: int = 1

    def __post_init__(self):
        object.__setattr__(self, "particle_blocklist", frozenset(self.particle_blocklist))
        if any(p != p.lower() for p in self.particle_blocklist):
            raise ValueError("particle blocklist entries must be lowercase")
        if self.max_substitutions_per_sentence < 1:
            raise ValueError("max_substitutions_per_sentence must be >= 1")
        if not -1.0 <= self.min_retrieval_score <= 1.0:
            raise ValueError("min_retrieval_score must lie in [-1, 1]")
        if self.k_per_word < 1:
            raise ValueError("k_per_word must be >= 1")

    def describe(self) -> dict:
        return {
            "name": self.name,
            "particle_blocklist": sorted(self.particle_blocklist),
            "max_substitutions_per_sentence": self.max_substitutions_per_sentence,
            "min_retrieval_score": self.min_retrieval_score,
            "k_per_word": self.k_per_word,
        }


@dataclass(frozen=True)
class DictionaryCue:
    token: str
    word: str
    meaning: str
    label: str | None = None
    score: float | None = None

    def prompt_record(self) -> dict[str, str]:
        record = {"token": self.token, "word": self.word}
        if self.label is not None:
            record["label"] = self.label
        record["meaning"] = self.meaning
        return record


@dataclass(frozen=True)
class ValidationReport:
    particle_violations: tuple[str, ...] = ()
    sentence_spans: tuple[int, ...] = ()
    budget_violations: tuple[int, ...] = ()
    punctuation_changes: int = 0
    case_changes: int = 0
    sentence_count_changed: bool = False

    @property
    def compliant(self) -> bool:
        return not (
            self.particle_violations
            or self.budget_violations
            or self.punctuation_changes
            or self.case_changes
            or self.sentence_count_changed
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        d["compliant"] = self.compliant
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ValidationReport:
        return cls(
            particle_violations=tuple(d.get("particle_violations", ())),
            sentence_spans=tuple(d.get("sentence_spans", ())),
            budget_violations=tuple(d.get("budget_violations", ())),
            punctuation_changes=d.get("punctuation_changes", 0),
            case_changes=d.get("case_changes", 0),
            sentence_count_changed=d.get("sentence_count_changed", False),
        )


@dataclass(frozen=True)
class RewriteTrace:
    mode: str
    context: tuple[tuple[str, str], ...]
    base_response: str
    cues: tuple[DictionaryCue, ...]
    prompt: str
    final_response: str
    validation: ValidationReport
    rewrite_called: bool = False
    settings: dict = field(default_factory=dict, compare=False)
    id: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "mode": self.mode,
            "context": [{"role": r, "content": c} for r, c in self.context],
            "base_response": self.base_response,
            "cues": [asdict(c) for c in self.cues],
            "prompt": self.prompt,
            "final_response": self.final_response,
            "rewrite_called": self.rewrite_called,
            "validation": self.validation.to_dict(),
            "settings": self.settings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> RewriteTrace:
        return cls(
            mode=d["mode"],
            context=tuple((m["role"], m["content"]) for m in d.get("context", [])),
            base_response=d["base_response"],
            cues=tuple(DictionaryCue(**c) for c in d.get("cues", [])),
            prompt=d.get("prompt", ""),
            final_response=d["final_response"],
            validation=ValidationReport.from_dict(d.get("validation", {})),
            rewrite_called=d.get("rewrite_called", False),
            settings=d.get("settings", {}),
            id=d.get("id", ""),
        )


# -- prompt assembly -------------------------------------------------------


def format_dictionary(cues: Sequence[DictionaryCue], style: str = "json") -> str:
    """Single-line list of cue records with keys token, word, label, meaning."""
    records = [c.prompt_record() for c in cues]
    if style == "json":
        return json.dumps(records, ensure_ascii=False)
    if style == "python":
        return repr(records)
    raise ValueError(f"unknown dictionary style: {style!r}")


def assemble_rewrite_prompt(
    base: str,
    cues: Sequence[DictionaryCue],
    cfg: VarietyConfig | None = None,
    *,
    template: str = REWRITE_TEMPLATE,
    dict_style: str = "json",
) -> str:
    return template.format(dict_str=format_dictionary(cues, dict_style), sentence=base)


# -- validation ------------------------------------------------------------


def _touches_non_word(span, a: Sequence[Token], b: Sequence[Token]) -> bool:
    for _, i, j in span:
        if i is not None and a[i].kind != "word":
            return True
        if j is not None and b[j].kind != "word":
            return True
    return False


def _span_report(a: Sequence[Token], b: Sequence[Token]):
    ops = align([t.lower for t in a], [t.lower for t in b])
    spans = changed_spans(ops)
    punct = sum(_touches_non_word(s, a, b) for s in spans)
    case = sum(1 for op, i, j in ops if op == "equal" and a[i].surface != b[j].surface)
    return ops, spans, punct, case


def validate_rewrite(base: str, final: str, cfg: VarietyConfig | None = None) -> ValidationReport:
    """Check a rewrite against the rewrite rules that can be checked locally.

    Sentences end at . ! or ? followed by whitespace. Changed spans are
    maximal runs of edits in a token alignment of each sentence pair.
    """
    cfg = cfg or VarietyConfig()
    bt, ft = tokenize(base), tokenize(final)
    before = {t.lower for t in bt}
    particles = tuple(sorted({t.lower for t in ft if t.lower in cfg.particle_blocklist} - before))

    bs, fs = split_sentences(bt, base), split_sentences(ft, final)
    punct = case = 0
    if len(bs) == len(fs):
        counts = []
        for sa, sb in zip(bs, fs):
            _, spans, p, c = _span_report(sa, sb)
            counts.append(len(spans))
            punct += p
            case += c
        changed_count = False
    else:
        # attribute each span of a whole-text alignment to a base sentence
        sentence_of = [k for k, s in enumerate(bs) for _ in s]
        counts = [0] * max(1, len(bs))
        ops, spans, punct, case = _span_report(bt, ft)
        last_i = 0
        span_iter = iter(spans)
        current = next(span_iter, None)
        for op in ops:
            if current is not None and op is current[0]:
                first_i = next((i for _, i, _ in current if i is not None), None)
                idx = first_i if first_i is not None else last_i
                counts[sentence_of[idx] if sentence_of else 0] += 1
                current = next(span_iter, None)
            if op[1] is not None:
                last_i = op[1]
        changed_count = True

    budget = tuple(k for k, n in enumerate(counts) if n > cfg.max_substitutions_per_sentence)
    return ValidationReport(
        particle_violations=particles,
        sentence_spans=tuple(counts),
        budget_violations=budget,
        punctuation_changes=punct,
        case_changes=case,
        sentence_count_changed=changed_count,
    )


# -- the pipeline ----------------------------------------------------------


def _messages(system: str, context: Sequence[Message]) -> list[dict]:
    return [{"role": "system", "content": system}] + [
        {"role": m["role"], "content": m["content"]} for m in context
    ]


def _check_context(context: Sequence[Message]) -> None:
    if not context:
        raise ValueError("context must contain at least one message")
    if context[-1]["role"] != "user":
        raise ValueError("the last context message must come from the user")


def generate_base(context: Sequence[Message], chat: ChatProvider) -> str:
    """Standard English reply to ``context`` under the baseline system prompt."""
    _check_context(context)
    reply = chat.complete(_messages(BASELINE_SYSTEM_PROMPT, context))
    if not reply or not reply.strip():
        raise EmptyCompletion("empty base response")
    return reply


def retrieve_cues(
    base: str,
    lexicon: Lexicon,
    index: HnswIndex,
    cfg: VarietyConfig,
    embedder: Embedder,
    *,
    tagger: PosTagger | None = None,
    stoplist: frozenset[str] = DEFAULT_STOPLIST,
) -> list[DictionaryCue]:
    """Lexicon cues for the content words of ``base``.

    Each content word (lowercased surface) is looked up with
    ``k_per_word`` neighbors; hits under ``min_retrieval_score`` are
    dropped. A lexicon entry appears at most once, attached to its
    best-scoring token (earliest on ties), and cues follow token order.
    """
    if index.lexicon_checksum and index.lexicon_checksum != lexicon.checksum:
        raise ChecksumMismatch(lexicon.checksum, index.lexicon_checksum)
    if embedder.dim != index.dim:
        raise DimensionMismatch(index.dim, embedder.dim)
    tokens = tokenize(base)
    words = extract_content_words(tokens, tagger or BaselineTagger(), stoplist)
    if not words:
        return []
    lemmas = list(dict.fromkeys(w.lemma for w in words))
    vectors = dict(zip(lemmas, embedder.embed(lemmas)))

    best: dict[str, tuple[float, int]] = {}
    for w in words:
        for hit in index.query(vectors[w.lemma], cfg.k_per_word):
            if hit.score < cfg.min_retrieval_score:
                continue
            held = best.get(hit.entry_id)
            if held is None or hit.score > held[0]:
                best[hit.entry_id] = (hit.score, w.token_index)

    ordered = sorted(best.items(), key=lambda kv: (kv[1][1], -kv[1][0], kv[0]))
    cues = []
    for entry_id, (score, token_index) in ordered:
        entry = lexicon.get(entry_id)
        cues.append(DictionaryCue(
            token=tokens[token_index].surface, word=entry.word, meaning=entry.meaning,
            label=entry.label, score=score,
        ))
    return cues


@dataclass
class RewritePipeline:
    """Bundles the resources one run needs.

    ``lexicon``, ``index`` and ``embedder`` are only required for the
    ``rag`` condition.
    """

    chat: ChatProvider
    lexicon: Lexicon | None = None
    index: HnswIndex | None = None
    embedder: Embedder | None = None
    variety: VarietyConfig = field(default_factory=VarietyConfig)
    tagger: PosTagger | None = None
    stoplist: frozenset[str] = DEFAULT_STOPLIST
    short_circuit: bool = True
    dict_style: str = "json"
    extra_settings: dict = field(default_factory=dict)

    def settings(self) -> dict:
        s = {
            "variety": self.variety.describe(),
            "short_circuit": self.short_circuit,
            "prompts_version": PROMPTS_VERSION,
            "dict_style": self.dict_style,
        }
        if self.lexicon is not None:
            s["lexicon_checksum"] = self.lexicon.checksum
        s.update(self.extra_settings)
        return s

    def _trace(self, mode, context, base, cues, prompt, final, called, id) -> RewriteTrace:
        return RewriteTrace(
            mode=mode,
            context=tuple((m["role"], m["content"]) for m in context),
            base_response=base,
            cues=tuple(cues),
            prompt=prompt,
            final_response=final,
            validation=validate_rewrite(base, final, self.variety),
            rewrite_called=called,
            settings=self.settings(),
            id=id,
        )

    def retrieve(self, base: str) -> list[DictionaryCue]:
        if self.lexicon is None or self.index is None or self.embedder is None:
            raise ValueError("rag mode needs a lexicon, an index and an embedder")
        return retrieve_cues(base, self.lexicon, self.index, self.variety, self.embedder,
                             tagger=self.tagger, stoplist=self.stoplist)

    def rewrite(self, base: str, context: Sequence[Message] = (), id: str = "") -> RewriteTrace:
        cues = self.retrieve(base)
        if not cues and self.short_circuit:
            return self._trace("rag", context, base, cues, "", base, False, id)
        prompt = assemble_rewrite_prompt(base, cues, self.variety, dict_style=self.dict_style)
        final = self.chat.complete([{"role": "user", "content": prompt}])
        if not final or not final.strip():
            raise EmptyCompletion("empty rewrite")
        return self._trace("rag", context, base, cues, prompt, final, True, id)

    def zero_shot(self, context: Sequence[Message], base: str | None = None, id: str = "") -> RewriteTrace:
        _check_context(context)
        if base is None:
            base = generate_base(context, self.chat)
        final = self.chat.complete(_messages(ZERO_SHOT_SYSTEM_PROMPT, context))
        if not final or not final.strip():
            raise EmptyCompletion("empty zero-shot response")
        return self._trace("zero_shot", context, base, (), ZERO_SHOT_SYSTEM_PROMPT, final, True, id)

    def run(self, mode: str, context: Sequence[Message] = (), base: str | None = None,
            id: str = "") -> RewriteTrace:
        """Run one condition. A supplied ``base`` skips base generation."""
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "zero_shot":
            return self.zero_shot(context, base, id)
        if base is None:
            base = generate_base(context, self.chat)
        if mode == "baseline":
            return self._trace("baseline", context, base, (), "", base, False, id)
        return self.rewrite(base, context, id)

    def run_batch(self, mode: str, items: Iterable[dict], concurrency: int = 1) -> list[RewriteTrace]:
        """Run ``items`` (dicts with ``context``, optional ``base`` and ``id``)
        and return traces in input order."""
        items = list(items)

        def one(item):
            return self.run(mode, item.get("context", ()), item.get("base"), item.get("id", ""))

        if concurrency <= 1 or len(items) <= 1:
            return [one(it) for it in items]
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            return list(pool.map(one, items))


def rewrite(base: str, lexicon: Lexicon, index: HnswIndex, cfg: VarietyConfig,
            chat: ChatProvider, embedder: Embedder, *, short_circuit: bool = True) -> RewriteTrace:
    pipe = RewritePipeline(chat, lexicon, index, embedder, cfg, short_circuit=short_circuit)
    return pipe.rewrite(base)


def zero_shot_rewrite(context: Sequence[Message], chat: ChatProvider,
                      cfg: VarietyConfig | None = None) -> RewriteTrace:
    return RewritePipeline(chat, variety=cfg or VarietyConfig()).zero_shot(context)


def run_condition(mode: str, context: Sequence[Message], chat: ChatProvider, **resources) -> RewriteTrace:
    base = resources.pop("base", None)
    return RewritePipeline(chat, **resources).run(mode, context, base)


def read_traces(lines: Iterable[str]) -> list[RewriteTrace]:
    return [RewriteTrace.from_dict(json.loads(line)) for line in lines if line.strip()]
