"""Loading, validation and canonical serialization of the dialect lexicon.

A lexicon file is JSONL, one entry per line::

    {"word": "sian", "meaning": "bored; tired of", "example": "So sian today."}

``label`` is optional. Entries are keyed by a normalized form of ``word``;
two entries that differ only in case are rejected.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal

from .errors import DuplicateEntry, EmptyField, EmptyLexicon, MissingFile, ParseError

EmbedPolicy = Literal["gloss", "word", "word+gloss"]

_FIELDS = ("word", "meaning", "example", "label")
_WS = re.compile(r"\s+")


def normalize_word(word: str) -> str:
    """Stable identifier for ``word``: NFKC, casefolded, inner spaces as ``_``."""
    text = unicodedata.normalize("NFKC", word).casefold().strip()
    return _WS.sub("_", text)


@dataclass(frozen=True)
class LexiconEntry:
    word: str
    meaning: str
    example: str = ""
    label: str | None = None

    def __post_init__(self):
        if not self.word.strip():
            raise EmptyField(self.word, "word")
        if not self.meaning.strip():
            raise EmptyField(self.word, "meaning")
        if self.label is not None and not self.label.strip():
            raise EmptyField(self.word, "label")

    @property
    def id(self) -> str:
        return normalize_word(self.word)

    def to_record(self) -> dict[str, str]:
        record = {"word": self.word, "meaning": self.meaning, "example": self.example}
        if self.label is not None:
            record["label"] = self.label
        return record


def _canonical_line(entry: LexiconEntry) -> str:
    return json.dumps(entry.to_record(), ensure_ascii=False, separators=(",", ":"))


def canonical_serialization(entries: Iterable[LexiconEntry]) -> str:
    return "".join(_canonical_line(e) + "\n" for e in entries)


def compute_checksum(entries: Iterable[LexiconEntry]) -> str:
    data = canonical_serialization(entries).encode("utf-8")
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class Lexicon:
    """Immutable, validated collection of entries in file order."""

    entries: tuple[LexiconEntry, ...]
    source_path: str = ""
    checksum: str = ""

    def __post_init__(self):
        if not self.entries:
            raise EmptyLexicon("lexicon has no entries")
        seen: set[str] = set()
        for entry in self.entries:
            if entry.id in seen:
                raise DuplicateEntry(entry.word)
            seen.add(entry.id)
        if not self.checksum:
            object.__setattr__(self, "checksum", compute_checksum(self.entries))
        object.__setattr__(self, "_by_id", {e.id: e for e in self.entries})

    @classmethod
    def from_entries(cls, entries: Iterable[LexiconEntry], source_path: str = "") -> Lexicon:
        return cls(tuple(entries), source_path=source_path)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, entry_id: str) -> bool:
        return entry_id in self._by_id

    def get(self, entry_id: str) -> LexiconEntry:
        return self._by_id[entry_id]

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]


def _entry_from_record(record: object, line: int, path: str) -> LexiconEntry:
    if not isinstance(record, dict):
        raise ParseError(line, "expected a JSON object", path)
    unknown = set(record) - set(_FIELDS)
    if unknown:
        raise ParseError(line, f"unknown keys: {sorted(unknown)}", path)
    for key in ("word", "meaning", "example"):
        if key not in record:
            raise ParseError(line, f"missing key {key!r}", path)
    label = record.get("label")
    for key in _FIELDS:
        value = record.get(key)
        if value is not None and not isinstance(value, str):
            raise ParseError(line, f"{key!r} must be a string", path)
    word = record["word"].strip()
    for key in ("word", "meaning"):
        if not record[key].strip():
            raise EmptyField(word, key, line)
    if label is not None and not label.strip():
        raise EmptyField(word, "label", line)
    return LexiconEntry(
        word=word,
        meaning=record["meaning"].strip(),
        example=record["example"].strip(),
        label=label.strip() if label is not None else None,
    )


def _collect(records: Iterable[tuple[int, LexiconEntry]], path: str) -> Lexicon:
    entries: list[LexiconEntry] = []
    seen: dict[str, int] = {}
    for line, entry in records:
        if entry.id in seen:
            raise DuplicateEntry(entry.word, line)
        seen[entry.id] = line
        entries.append(entry)
    if not entries:
        raise EmptyLexicon(f"{path}: lexicon has no entries")
    return Lexicon(tuple(entries), source_path=path)


def load_lexicon(path: str | Path) -> Lexicon:
    """Read and validate a JSONL lexicon. Blank lines are skipped."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    text = path.read_text(encoding="utf-8")

    def records():
        for lineno, raw in enumerate(text.split("\n"), start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON: {exc.msg}", str(path)) from None
            yield lineno, _entry_from_record(record, lineno, str(path))

    return _collect(records(), str(path))


def load_lexicon_csv(path: str | Path) -> Lexicon:
    """Import a CSV with header ``word,meaning,example,label``."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = {"word", "meaning", "example"} - set(header)
        if missing:
            raise ParseError(1, f"CSV header lacks {sorted(missing)}", str(path))

        def records():
            for row in reader:
                lineno = reader.line_num
                if not any((v or "").strip() for v in row.values()):
                    continue
                record = {k: row.get(k) or "" for k in ("word", "meaning", "example")}
                if (row.get("label") or "").strip():
                    record["label"] = row["label"]
                yield lineno, _entry_from_record(record, lineno, str(path))

        return _collect(records(), str(path))


def dump_lexicon(lexicon: Lexicon | Iterable[LexiconEntry], path: str | Path) -> None:
    """Write the canonical JSONL form (UTF-8, LF)."""
    Path(path).write_text(canonical_serialization(lexicon), encoding="utf-8", newline="\n")


def entry_text_for_embedding(entry: LexiconEntry, policy: EmbedPolicy = "gloss") -> str:
    """Text that represents ``entry`` in the embedding space.

    The default embeds the gloss alone, since retrieval queries are plain
    English content words and should meet the English definition.
    """
    if policy == "gloss":
        return entry.meaning
    if policy == "word":
        return entry.word
    if policy == "word+gloss":
        return f"{entry.word} — {entry.meaning}"
    raise ValueError(f"unknown embedding policy: {policy!r}")
