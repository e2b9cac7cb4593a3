"""Embedding providers and cosine similarity.

Two providers share one interface (``embed(texts) -> list[EmbeddingVector]``):

* :class:`HashingEmbedder` -- offline, deterministic character-trigram
  feature hashing. Used by the test-suite and as the CLI default.
* :class:`RemoteEmbedder` -- an OpenAI-compatible ``/embeddings`` endpoint.

Every vector leaving a provider is L2-normalized, so cosine similarity
between provider outputs is a plain dot product.
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
import threading
import time
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Protocol, Sequence

import httpx
import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    ProviderError,
    ProviderUnavailable,
    ZeroVector,
)

log = logging.getLogger(__name__)

API_KEY_ENV = "LEXISWITCH_API_KEY"
BASE_URL_ENV = "LEXISWITCH_BASE_URL"
NORM_TOLERANCE = 1e-6


class EmbeddingVector:
    """Fixed-dimension real vector. Immutable; compares by exact value."""

    __slots__ = ("values", "normalized")

    def __init__(self, values, normalized: bool = False):
        arr = np.array(values, dtype=np.float64).reshape(-1)
        if arr.size == 0:
            raise EmptyInput("embedding vector has no components")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding vector has non-finite components")
        if normalized:
            norm = float(np.linalg.norm(arr))
            if abs(norm - 1.0) > NORM_TOLERANCE:
                raise ValueError(f"vector flagged normalized but has norm {norm}")
        arr.setflags(write=False)
        self.values = arr
        self.normalized = normalized

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def normalize(self) -> EmbeddingVector:
        norm = self.norm
        if norm == 0.0:
            raise ZeroVector("cannot normalize a zero vector")
        return EmbeddingVector(self.values / norm, normalized=True)

    def tolist(self) -> list[float]:
        return self.values.tolist()

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    def __repr__(self) -> str:
        return f"EmbeddingVector(dim={self.dim}, normalized={self.normalized})"


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """dot(a, b) / (|a| |b|), clamped to [-1, 1]."""
    if a.dim != b.dim:
        raise DimensionMismatch(a.dim, b.dim)
    if a.normalized and b.normalized:
        value = float(np.dot(a.values, b.values))
    else:
        na, nb = a.norm, b.norm
        if na == 0.0 or nb == 0.0:
            raise ZeroVector("cosine similarity of a zero vector is undefined")
        value = float(np.dot(a.values, b.values)) / (na * nb)
    return min(1.0, max(-1.0, value))


class Embedder(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    kind: Literal["remote", "deterministic"] = "deterministic"
    endpoint: str | None = None
    model_name: str = "char3-hash"
    dim: int = 256
    timeout: float = 30.0
    max_batch: int = 64
    concurrency: int = 4

    def __post_init__(self):
        if self.kind not in ("remote", "deterministic"):
            raise ValueError(f"unknown embedding provider kind: {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote embedding provider requires an endpoint")
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.max_batch <= 0:
            raise ValueError("max_batch must be positive")

    def describe(self) -> dict:
        return {"kind": self.kind, "model_name": self.model_name, "dim": self.dim}


def _check_texts(texts: Sequence[str]) -> None:
    if not texts:
        raise EmptyInput("no texts to embed")
    for i, t in enumerate(texts):
        if not isinstance(t, str) or not t.strip():
            raise EmptyInput(f"text #{i} is empty")


# -- deterministic provider ------------------------------------------------

_WS = re.compile(r"\s+")


def canonicalize(text: str) -> str:
    """NFC-normalize and collapse whitespace. Case is preserved."""
    return _WS.sub(" ", unicodedata.normalize("NFC", text)).strip()


class HashingEmbedder:
    """Signed feature hashing of character trigrams.

    The canonical text is padded with one space on each side so word
    boundaries contribute features, split into overlapping 3-character
    windows, and each window adds a signed weight to one of ``dim`` buckets.
    Bucket, sign and weight all come from a BLAKE2b digest of the window.
    """

    n = 3

    def __init__(self, dim: int = 256):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def _features(self, text: str) -> list[str]:
        padded = f" {text} "
        return [padded[i : i + self.n] for i in range(len(padded) - self.n + 1)]

    def _bucket(self, feature: str) -> tuple[int, float]:
        digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=16).digest()
        h = int.from_bytes(digest[:8], "little")
        # magnitude in [1, 1.5) so distinct feature sets almost never sum alike
        weight = 1.0 + int.from_bytes(digest[8:], "little") / 2.0 ** 65
        return (h >> 1) % self.dim, (weight if h & 1 else -weight)

    def embed_one(self, text: str) -> EmbeddingVector:
        canon = canonicalize(text)
        if not canon:
            raise EmptyInput("cannot embed empty text")
        acc = np.zeros(self.dim, dtype=np.float64)
        for feature in self._features(canon):
            bucket, sign = self._bucket(feature)
            acc[bucket] += sign
        norm = np.linalg.norm(acc)
        if norm == 0.0:
            # every feature cancelled out; fall back to one whole-text feature
            bucket, sign = self._bucket("\x00" + canon)
            acc[bucket] = sign
            norm = 1.0
        return EmbeddingVector(acc / norm, normalized=True)

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _check_texts(texts)
        return [self.embed_one(t) for t in texts]


# -- remote provider -------------------------------------------------------


class ProviderLimiter:
    """Process-wide cap on in-flight remote requests."""

    _lock = threading.Lock()
    _semaphore = threading.BoundedSemaphore(4)
    _limit = 4

    @classmethod
    def configure(cls, limit: int) -> None:
        if limit < 1:
            raise ValueError("concurrency limit must be >= 1")
        with cls._lock:
            cls._semaphore = threading.BoundedSemaphore(limit)
            cls._limit = limit

    @classmethod
    def limit(cls) -> int:
        return cls._limit

    @classmethod
    def slot(cls) -> threading.BoundedSemaphore:
        return cls._semaphore


def _is_transient(status: int) -> bool:
    return status == 429 or status >= 500


def post_json_with_retry(
    client: httpx.Client,
    url: str,
    payload: dict,
    *,
    attempts: int = 3,
    backoff: float = 0.5,
    sleep=time.sleep,
) -> dict:
    """POST ``payload`` and return the decoded JSON reply.

    Connection errors, timeouts, 429 and 5xx are retried with exponential
    backoff; other HTTP errors fail immediately.
    """
    headers = {}
    key = os.environ.get(API_KEY_ENV)
    if key:
        headers["Authorization"] = f"Bearer {key}"
    last: Exception | None = None
    for attempt in range(attempts):
        if attempt:
            sleep(backoff * 2 ** (attempt - 1))
        try:
            with ProviderLimiter.slot():
                resp = client.post(url, json=payload, headers=headers)
        except httpx.TransportError as exc:
            log.warning("request to %s failed (attempt %d): %s", url, attempt + 1, exc)
            last = ProviderUnavailable(f"{url}: {exc}")
            continue
        if resp.status_code >= 400:
            err = ProviderError(resp.status_code, resp.text)
            if _is_transient(resp.status_code):
                log.warning("%s returned %d (attempt %d)", url, resp.status_code, attempt + 1)
                last = err
                continue
            raise err
        try:
            return resp.json()
        except ValueError:
            raise ProviderError(resp.status_code, resp.text) from None
    assert last is not None
    raise last


class RemoteEmbedder:
    """Client for ``POST {endpoint}/embeddings`` (OpenAI wire format)."""

    def __init__(self, cfg: EmbeddingProviderConfig, transport: httpx.BaseTransport | None = None,
                 sleep=time.sleep):
        if not cfg.endpoint:
            raise ValueError("remote embedding provider requires an endpoint")
        self.cfg = cfg
        self.dim = cfg.dim
        self.url = cfg.endpoint.rstrip("/") + "/embeddings"
        self._transport = transport
        self._sleep = sleep

    def _client(self) -> httpx.Client:
        return httpx.Client(timeout=self.cfg.timeout, transport=self._transport)

    def _embed_chunk(self, chunk: Sequence[str]) -> list[EmbeddingVector]:
        with self._client() as client:
            body = post_json_with_retry(
                client, self.url, {"model": self.cfg.model_name, "input": list(chunk)},
                sleep=self._sleep,
            )
        try:
            data = sorted(body["data"], key=lambda d: d.get("index", 0))
            raw = [d["embedding"] for d in data]
        except (KeyError, TypeError, AttributeError):
            raise ProviderError(200, f"malformed embeddings reply: {str(body)[:200]}") from None
        if len(raw) != len(chunk):
            raise ProviderError(200, f"expected {len(chunk)} embeddings, got {len(raw)}")
        out = []
        for values in raw:
            if len(values) != self.cfg.dim:
                raise DimensionMismatch(self.cfg.dim, len(values))
            try:
                out.append(EmbeddingVector(values).normalize())
            except (ValueError, ZeroVector) as exc:
                raise ProviderError(200, f"unusable embedding: {exc}") from None
        return out

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _check_texts(texts)
        step = self.cfg.max_batch
        chunks = [list(texts[i : i + step]) for i in range(0, len(texts), step)]
        if len(chunks) == 1:
            return self._embed_chunk(chunks[0])
        workers = max(1, min(self.cfg.concurrency, len(chunks)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(self._embed_chunk, chunks))
        return [v for part in results for v in part]


def make_embedder(cfg: EmbeddingProviderConfig, transport: httpx.BaseTransport | None = None) -> Embedder:
    if cfg.kind == "deterministic":
        return HashingEmbedder(cfg.dim)
    return RemoteEmbedder(cfg, transport=transport)


def embed_batch(texts: Sequence[str], cfg: EmbeddingProviderConfig,
                transport: httpx.BaseTransport | None = None) -> list[EmbeddingVector]:
    """Embed ``texts`` in order; every returned vector is unit-length with ``cfg.dim``."""
    vectors = make_embedder(cfg, transport).embed(texts)
    for v in vectors:
        if v.dim != cfg.dim:
            raise DimensionMismatch(cfg.dim, v.dim)
    return vectors

