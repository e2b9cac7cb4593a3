"""Tokenization and content-word extraction.

One tokenizer serves both candidate extraction and the edit-distance metric,
so "one token" means the same thing in both places:

* runs of letters/digits (plus combining marks) form word or number tokens;
* every punctuation or symbol character is its own token, hyphens included;
* contractions split at the apostrophe, which stays on the suffix
  (``don't`` -> ``do`` ``n't``, ``it's`` -> ``it`` ``'s``).
"""

from __future__ import annotations

import subprocess
import threading
import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Literal, Protocol, Sequence

from .errors import MissingFile, TaggerMisalignment

TokenKind = Literal["word", "punctuation", "number", "symbol"]

CONTENT_TAGS = frozenset({"NOUN", "PROPN", "VERB", "ADJ", "ADV"})
TAGSET = frozenset({
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
})
APOSTROPHES = "'’"
SENTENCE_END = frozenset(".!?")


@dataclass(frozen=True, slots=True)
class Token:
    surface: str
    lower: str
    start: int
    end: int
    kind: TokenKind


@dataclass(frozen=True, slots=True)
class ContentWord:
    token_index: int
    lemma: str
    pos: str


def _is_wordchar(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "LNM"


def _kind(surface: str) -> TokenKind:
    if any(unicodedata.category(c)[0] == "L" for c in surface):
        return "word"
    return "number"


def _run_end(text: str, i: int) -> int:
    """End of the letter/digit run starting at ``i``; 3.5 and 1,000 stay whole."""
    n = len(text)
    j = i
    while j < n:
        if _is_wordchar(text[j]):
            j += 1
        elif (
            text[j] in ".,"
            and j + 1 < n
            and text[j + 1].isdigit()
            and text[i:j].isdigit()
        ):
            j += 1
        else:
            break
    return j


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into tokens with character offsets.

    Lossless: every non-whitespace character belongs to exactly one token,
    so ``text[t.start:t.end] == t.surface`` and the gaps are whitespace.
    """
    out: list[Token] = []

    def emit(start: int, end: int, kind: TokenKind | None = None) -> None:
        surface = text[start:end]
        out.append(Token(surface, surface.lower(), start, end, kind or _kind(surface)))

    n = len(text)
    i = 0
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        cat = unicodedata.category(ch)
        if cat[0] in "LN":
            j = _run_end(text, i)
            start = i
            # contraction: letters, apostrophe, letters
            while (
                j + 1 < n
                and text[j] in APOSTROPHES
                and unicodedata.category(text[j + 1])[0] == "L"
                and _kind(text[start:j]) == "word"
            ):
                k = _run_end(text, j + 1)
                suffix = text[j + 1 : k].lower()
                if suffix == "t" and text[j - 1] in "nN" and j - 1 > start:
                    emit(start, j - 1, "word")
                    start = j - 1
                else:
                    emit(start, j, "word")
                    start = j
                j = k
            emit(start, j)
            i = j
        elif cat[0] == "P":
            emit(i, i + 1, "punctuation")
            i += 1
        else:
            emit(i, i + 1, "symbol")
            i += 1
    return out


# -- tagging ---------------------------------------------------------------


class PosTagger(Protocol):
    def tag(self, tokens: Sequence[Token]) -> list[str]: ...


_CLOSED: dict[str, str] = {}


def _closed(tag: str, words: str) -> None:
    for w in words.split():
        _CLOSED.setdefault(w, tag)


_closed("PRON", """i me you he him she her it we us they them myself yourself himself
    herself itself ourselves yourselves themselves mine yours hers ours theirs who whom
    anyone anybody anything someone somebody something everyone everybody everything
    nobody nothing none""")
_closed("DET", """a an the my your his its our their some any no every each all both
    either neither another such what which whose these those""")
_closed("AUX", """be am is are was were been being have has had having do does did will
    would shall should can could may might must 're 'm 've 'll 'd ca wo""")
_closed("ADP", """of in on at by for with about against between into through during before
    after above below from up down out off over under around across along among behind
    beside beyond near per since toward towards upon within without like than via""")
_closed("CCONJ", "and or but nor yet")
_closed("SCONJ", "if because although though while whereas unless until whether once")
_closed("INTJ", "hi hello hey oh ah wow yes yeah ok okay thanks please bye alright")
_closed("PART", "not n't")
_closed("ADV", """very really so too quite just also always never often sometimes usually
    here there now then still even again already soon today tomorrow yesterday maybe
    perhaps however anyway instead almost rather well how when where why""")
_closed("NUM", "one two three four five six seven eight nine ten hundred thousand million")

_SUBJECTS = frozenset("i you he she it we they who".split())
_VERB_TRIGGERS = frozenset(
    "can could will would shall should may might must do does did to n't ca wo".split()
)
_BE = frozenset("be am is are was were been being 're 'm".split())
_LINKING = frozenset("""feel feels felt feeling seem seems seemed look looks looked sound
    sounds sounded become becomes became get gets got getting""".split())
_DEGREE = frozenset("""very really so too quite extremely pretty rather totally completely
    incredibly super truly absolutely""".split())
_NOT_ADV_LY = frozenset("""family reply supply apply fly butterfly july italy ally bully rally
    belly jelly""".split())
_ADJ_LY = frozenset("""lonely friendly lovely likely ugly silly early daily lively costly
    elderly holy only""".split())
_NOT_ING = frozenset("""thing things king ring spring string wing morning evening ceiling
    during bring sing""".split())
_NOT_IVE = frozenset("""give live drive arrive forgive survive thrive strive derive deprive
    alive olive""".split())
_NOUN_SUFFIXES = ("ness", "tion", "sion", "ment", "ity", "ship", "ance", "ence", "ism")
_ADJ_SUFFIXES = ("ous", "ful", "less", "ish")


def _sentence_starts(tokens: Sequence[Token]) -> list[bool]:
    starts = []
    at_start = True
    for tok in tokens:
        starts.append(at_start and tok.kind in ("word", "number"))
        if tok.kind in ("word", "number"):
            at_start = False
        elif tok.surface in SENTENCE_END:
            at_start = True
    return starts


def _next_word(tokens: Sequence[Token], i: int) -> Token | None:
    j = i + 1
    if j < len(tokens) and tokens[j].kind == "word":
        return tokens[j]
    return None


def _alone_in_sentence(tokens: Sequence[Token], i: int) -> bool:
    for tok in tokens[i + 1 :]:
        if tok.surface in SENTENCE_END:
            return True
        if tok.kind == "word":
            return False
    return True


def _open_class(lower: str) -> bool:
    return lower not in _CLOSED


def _suffix_tag(w: str) -> str | None:
    if w.endswith("ly") and len(w) > 3:
        if w in _ADJ_LY:
            return "ADJ"
        if w not in _NOT_ADV_LY:
            return "ADV"
    if w.endswith(_NOUN_SUFFIXES) and len(w) > 5:
        return "NOUN"
    if w.endswith(_ADJ_SUFFIXES) and len(w) > 5:
        return "ADJ"
    if w.endswith(("able", "ible")) and len(w) >= 7:
        return "ADJ"
    if w.endswith("ive") and len(w) >= 6 and w not in _NOT_IVE:
        return "ADJ"
    return None


def baseline_tag(tokens: Sequence[Token]) -> list[str]:
    """Deterministic heuristic part-of-speech labels (Universal tag names).

    Order of rules: token kind, closed-class lookup, capitalization,
    -ing/-ed participles in context, derivational suffixes, position after
    a subject or modal, and finally NOUN.
    """
    starts = _sentence_starts(tokens)
    tags: list[str] = []
    for i, tok in enumerate(tokens):
        if tok.kind == "punctuation":
            tags.append("PUNCT")
            continue
        if tok.kind == "symbol":
            tags.append("SYM")
            continue
        if tok.kind == "number":
            tags.append("NUM")
            continue

        w = tok.lower.replace("’", "'")
        prev = tokens[i - 1].lower.replace("’", "'") if i and tokens[i - 1].kind == "word" else None
        prev_tag = tags[i - 1] if i else None
        nxt = _next_word(tokens, i)

        if w in ("this", "that"):
            if nxt is None or not _open_class(nxt.lower):
                det_next = nxt is not None and _CLOSED.get(nxt.lower) in ("PRON", "DET")
                tags.append("SCONJ" if w == "that" and det_next else "PRON")
            elif nxt.lower.endswith("s") and not nxt.lower.endswith("ss"):
                tags.append("PRON")
            else:
                tags.append("DET")
            continue
        if w == "'s":
            tags.append("AUX" if prev_tag == "PRON" or prev in ("there", "here", "what", "where", "how", "who") else "PART")
            continue
        if w == "to":
            tags.append("PART" if nxt is not None and _open_class(nxt.lower) else "ADP")
            continue
        if w in _CLOSED:
            tags.append(_CLOSED[w])
            continue

        capitalized = tok.surface[0].isupper()
        if capitalized and not starts[i]:
            tags.append("PROPN")
            continue
        if capitalized and starts[i] and _alone_in_sentence(tokens, i):
            tags.append("PROPN")
            continue

        if (w.endswith("ing") and len(w) >= 5 and w not in _NOT_ING) or (
            w.endswith("ed") and len(w) >= 5 and not w.endswith("eed")
        ):
            if prev_tag == "DET":
                tags.append("ADJ" if nxt is not None and _open_class(nxt.lower) else "NOUN")
            elif prev in _DEGREE or prev in _LINKING:
                tags.append("ADJ")
            elif prev in _BE:
                tags.append("VERB" if w.endswith("ing") else "ADJ")
            else:
                tags.append("VERB")
            continue

        suffix = _suffix_tag(w)
        if suffix:
            tags.append(suffix)
            continue
        if prev in _SUBJECTS or prev in _VERB_TRIGGERS or (prev_tag == "PRON" and prev in ("this", "that")):
            tags.append("VERB")
            continue
        tags.append("NOUN")
    return tags


class BaselineTagger:
    def tag(self, tokens: Sequence[Token]) -> list[str]:
        return baseline_tag(tokens)


class ExternalTagger:
    """Adapter for a tagger subprocess speaking a line protocol.

    Per sentence the adapter writes one token per line followed by an empty
    line, and reads back one tag per line followed by an empty line.
    Access to the subprocess is serialized.
    """

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding="utf-8", bufsize=1,
            )
        return self._proc

    def _tag_sentence(self, proc: subprocess.Popen, words: list[str]) -> list[str]:
        assert proc.stdin is not None and proc.stdout is not None
        proc.stdin.write("".join(w + "\n" for w in words) + "\n")
        proc.stdin.flush()
        tags = []
        while True:
            line = proc.stdout.readline()
            if line == "":
                raise RuntimeError("external tagger exited unexpectedly")
            line = line.rstrip("\n")
            if not line:
                break
            tags.append(line.strip().upper())
        return [t if t in TAGSET else "X" for t in tags]

    def tag(self, tokens: Sequence[Token]) -> list[str]:
        sentences: list[list[str]] = [[]]
        for tok in tokens:
            sentences[-1].append(tok.surface.replace("\n", " "))
            if tok.surface in SENTENCE_END:
                sentences.append([])
        with self._lock:
            proc = self._ensure()
            tags: list[str] = []
            for words in sentences:
                if words:
                    tags.extend(self._tag_sentence(proc, words))
        return tags

    def close(self) -> None:
        with self._lock:
            if self._proc is not None:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
                self._proc = None


# -- stoplist and extraction -----------------------------------------------


def read_stoplist(path: str | Path) -> frozenset[str]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    return _parse_stoplist(path.read_text(encoding="utf-8").splitlines())


def _parse_stoplist(lines: Iterable[str]) -> frozenset[str]:
    return frozenset(
        line.strip().lower() for line in lines if line.strip() and not line.startswith("#")
    )


def default_stoplist() -> frozenset[str]:
    text = resources.files("lexiswitch.data").joinpath("stoplist.txt").read_text(encoding="utf-8")
    return _parse_stoplist(text.splitlines())


DEFAULT_STOPLIST = default_stoplist()


def extract_content_words(
    tokens: Sequence[Token],
    tagger: PosTagger | None = None,
    stoplist: frozenset[str] = DEFAULT_STOPLIST,
) -> list[ContentWord]:
    """Word tokens tagged NOUN/PROPN/VERB/ADJ/ADV and not stoplisted, in order."""
    tagger = tagger or BaselineTagger()
    tags = tagger.tag(tokens)
    if len(tags) != len(tokens):
        raise TaggerMisalignment(len(tokens), len(tags))
    return [
        ContentWord(i, tok.lower, tag)
        for i, (tok, tag) in enumerate(zip(tokens, tags))
        if tok.kind == "word" and tag in CONTENT_TAGS and tok.lower not in stoplist
    ]


def split_sentences(tokens: Sequence[Token], text: str) -> list[list[Token]]:
    """Group tokens into sentences ending at . ! or ? followed by whitespace."""
    sentences: list[list[Token]] = [[]]
    for tok in tokens:
        sentences[-1].append(tok)
        if tok.surface in SENTENCE_END and tok.end < len(text) and text[tok.end].isspace():
            sentences.append([])
    return [s for s in sentences if s]
