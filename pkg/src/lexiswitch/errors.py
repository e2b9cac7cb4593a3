"""Exception hierarchy shared by every lexiswitch module."""

from __future__ import annotations


class LexiSwitchError(Exception):
    """Base class for all library errors."""


class DataError(LexiSwitchError):
    """Bad or inconsistent input data (CLI exit code 3)."""


class ProviderFailure(LexiSwitchError):
    """A model backend could not produce a usable answer (CLI exit code 2)."""


# -- lexicon ---------------------------------------------------------------


class MissingFile(DataError, FileNotFoundError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"file not found: {self.path}")


class ParseError(DataError):
    def __init__(self, line: int, reason: str, path: str | None = None):
        self.line = line
        self.reason = reason
        self.path = path
        where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"{where}: {reason}")


class EmptyLexicon(DataError):
    pass


class DuplicateEntry(DataError):
    def __init__(self, word: str, line: int | None = None):
        self.word = word
        self.line = line
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(f"duplicate lexicon entry: {word!r}{suffix}")


class EmptyField(DataError):
    def __init__(self, word: str, field: str, line: int | None = None):
        self.word = word
        self.field = field
        self.line = line
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(f"entry {word!r}: field {field!r} is empty{suffix}")


# -- vectors and index -----------------------------------------------------


class DimensionMismatch(DataError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"dimension mismatch: expected {expected}, got {got}")


class ZeroVector(DataError):
    pass


class EmptyInput(DataError):
    pass


class DuplicateId(DataError):
    def __init__(self, entry_id: str):
        self.entry_id = entry_id
        super().__init__(f"duplicate entry id: {entry_id!r}")


class EmptyIndex(DataError):
    pass


class ChecksumMismatch(DataError):
    def __init__(self, expected: str, got: str):
        self.expected = expected
        self.got = got
        super().__init__(
            f"index was built from lexicon {got[:12]}..., not {expected[:12]}..."
        )


class SnapshotError(DataError):
    pass


# -- providers -------------------------------------------------------------


class ProviderUnavailable(ProviderFailure):
    pass


class ProviderError(ProviderFailure):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"provider returned HTTP {status}: {body[:200]}")


class EmptyCompletion(ProviderFailure):
    pass


# -- extraction and metrics ------------------------------------------------


class TaggerMisalignment(DataError):
    def __init__(self, n_tokens: int, n_tags: int):
        self.n_tokens = n_tokens
        self.n_tags = n_tags
        super().__init__(f"tagger returned {n_tags} tags for {n_tokens} tokens")


class EmptyText(DataError):
    pass


class EmptyGroup(DataError):
    def __init__(self, mode: str | None = None):
        self.mode = mode
        super().__init__(f"no records for mode {mode!r}" if mode else "no records")


class LengthMismatch(DataError):
    def __init__(self, n_x: int, n_y: int):
        super().__init__(f"length mismatch: {n_x} vs {n_y}")


class ZeroVariance(DataError):
    pass
