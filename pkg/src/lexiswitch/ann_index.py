"""Approximate nearest-neighbor search over lexicon embeddings.

:func:`build_index` constructs a hierarchical navigable small-world graph
(multi-layer proximity graph, geometric level assignment, greedy descent
from the top layer, beam search while inserting). :func:`brute_force_query`
is an exact full scan with the same ranking rules, kept as a reference.

Scores are cosine similarities; inside the graph the distance is
``1 - cosine`` so smaller is closer.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _hnsw_kernels as kernels
from .embedding import NORM_TOLERANCE, EmbeddingVector
from .errors import (
    DimensionMismatch,
    DuplicateId,
    EmptyIndex,
    EmptyInput,
    MissingFile,
    SnapshotError,
)

SNAPSHOT_FORMAT = "lexiswitch-hnsw"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class HnswParams:
    m: int = 16
    ef_construction: int = 200
    ef_search: int = 64
    seed: int = 42

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.ef_construction < self.m:
            raise ValueError("ef_construction must be >= m")
        if self.ef_search < 1:
            raise ValueError("ef_search must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


@dataclass(frozen=True)
class NeighborHit:
    entry_id: str
    score: float
    rank: int


def _rank(ids: Sequence[str], scores: np.ndarray, k: int) -> list[NeighborHit]:
    # ties on score resolve by entry_id ascending
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))[:k]
    return [NeighborHit(ids[i], float(scores[i]), r) for r, i in enumerate(order, start=1)]


def _stack(vectors: Sequence[tuple[str, EmbeddingVector]]) -> tuple[list[str], np.ndarray]:
    if not vectors:
        raise EmptyInput("no vectors to index")
    dim = vectors[0][1].dim
    ids: list[str] = []
    seen: set[str] = set()
    for entry_id, v in vectors:
        if v.dim != dim:
            raise DimensionMismatch(dim, v.dim)
        if entry_id in seen:
            raise DuplicateId(entry_id)
        seen.add(entry_id)
        ids.append(entry_id)
    data = np.ascontiguousarray(np.stack([v.values for _, v in vectors]), dtype=np.float64)
    norms = np.linalg.norm(data, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOLERANCE)
    if bad.size:
        raise ValueError(f"vector for {ids[bad[0]]!r} is not unit-length")
    return ids, data


def _check_query(q: EmbeddingVector, dim: int, k: int) -> np.ndarray:
    if q.dim != dim:
        raise DimensionMismatch(dim, q.dim)
    if k < 1:
        raise ValueError("k must be >= 1")
    return np.ascontiguousarray(q.values, dtype=np.float64)


def assign_levels(n: int, m: int, seed: int) -> np.ndarray:
    """Top layer of each node: floor(-ln(U) / ln(m)), U ~ Uniform(0, 1]."""
    rng = np.random.default_rng(seed)
    u = 1.0 - rng.random(n)
    return np.floor(-np.log(u) / math.log(m)).astype(np.int64)


@dataclass
class HnswIndex:
    params: HnswParams
    ids: list[str]
    data: np.ndarray
    levels: np.ndarray
    nbrs: np.ndarray
    cnt: np.ndarray
    entry: int
    max_level: int
    lexicon_checksum: str = ""
    embedder: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def neighbors(self, node: int, layer: int = 0) -> list[int]:
        return self.nbrs[layer, node, : self.cnt[layer, node]].tolist()

    def query(self, q: EmbeddingVector, k: int, ef: int | None = None) -> list[NeighborHit]:
        if not self.ids:
            raise EmptyIndex("index is empty")
        qv = _check_query(q, self.dim, k)
        ef = max(ef or self.params.ef_search, k)
        found, _ = kernels.search(
            self.data, qv, self.entry, self.max_level, ef, self.nbrs, self.cnt
        )
        scores = self.data[found] @ qv
        return _rank([self.ids[i] for i in found], scores, k)

    # -- persistence -------------------------------------------------------

    def to_snapshot(self) -> dict:
        layers = []
        for layer in range(self.max_level + 1):
            members = np.flatnonzero(self.levels >= layer).tolist()
            layers.append({str(i): self.neighbors(i, layer) for i in members})
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "params": asdict(self.params),
            "dim": self.dim,
            "lexicon_checksum": self.lexicon_checksum,
            "embedder": self.embedder,
            "entry": self.entry,
            "max_level": self.max_level,
            "ids": self.ids,
            "levels": self.levels.tolist(),
            "vectors": self.data.tolist(),
            "layers": layers,
        }

    def save(self, path: str | Path) -> None:
        text = json.dumps(self.to_snapshot(), ensure_ascii=False, separators=(",", ":"))
        Path(path).write_text(text + "\n", encoding="utf-8")

    @classmethod
    def from_snapshot(cls, snap: dict) -> HnswIndex:
        if snap.get("format") != SNAPSHOT_FORMAT:
            raise SnapshotError("not an index snapshot")
        if snap.get("version") != SNAPSHOT_VERSION:
            raise SnapshotError(f"unsupported snapshot version {snap.get('version')!r}")
        try:
            params = HnswParams(**snap["params"])
            ids = list(snap["ids"])
            data = np.ascontiguousarray(np.array(snap["vectors"], dtype=np.float64))
            levels = np.array(snap["levels"], dtype=np.int64)
            max_level = int(snap["max_level"])
            n = len(ids)
            if data.shape != (n, int(snap["dim"])) or levels.shape != (n,):
                raise SnapshotError("snapshot arrays do not agree in size")
            nbrs = np.full((max_level + 1, n, 2 * params.m), -1, dtype=np.int32)
            cnt = np.zeros((max_level + 1, n), dtype=np.int32)
            for layer, adjacency in enumerate(snap["layers"]):
                for node, linked in adjacency.items():
                    node = int(node)
                    nbrs[layer, node, : len(linked)] = linked
                    cnt[layer, node] = len(linked)
        except (KeyError, TypeError, ValueError) as exc:
            raise SnapshotError(f"malformed snapshot: {exc}") from None
        return cls(
            params=params, ids=ids, data=data, levels=levels, nbrs=nbrs, cnt=cnt,
            entry=int(snap["entry"]), max_level=max_level,
            lexicon_checksum=snap.get("lexicon_checksum", ""),
            embedder=snap.get("embedder", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> HnswIndex:
        path = Path(path)
        if not path.is_file():
            raise MissingFile(path)
        try:
            snap = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SnapshotError(f"{path}: invalid JSON: {exc.msg}") from None
        return cls.from_snapshot(snap)


def build_index(
    vectors: Sequence[tuple[str, EmbeddingVector]],
    params: HnswParams = HnswParams(),
    *,
    lexicon_checksum: str = "",
    embedder: dict | None = None,
) -> HnswIndex:
    """Build the graph over ``vectors`` in the given order."""
    ids, data = _stack(vectors)
    levels = assign_levels(len(ids), params.m, params.seed)
    nbrs, cnt, entry, max_level = kernels.build_graph(
        data, levels, params.m, params.ef_construction
    )
    return HnswIndex(
        params=params, ids=ids, data=data, levels=levels, nbrs=nbrs, cnt=cnt,
        entry=int(entry), max_level=int(max_level),
        lexicon_checksum=lexicon_checksum, embedder=dict(embedder or {}),
    )


def query(index: HnswIndex, q: EmbeddingVector, k: int) -> list[NeighborHit]:
    return index.query(q, k)


class ExactScan:
    """Stacked vectors for repeated exact queries."""

    def __init__(self, vectors: Sequence[tuple[str, EmbeddingVector]]):
        if not vectors:
            raise EmptyIndex("nothing to scan")
        self.ids, self.data = _stack(vectors)

    def query(self, q: EmbeddingVector, k: int) -> list[NeighborHit]:
        qv = _check_query(q, self.data.shape[1], k)
        scores = self.data @ qv
        k_eff = min(k, len(self.ids))
        if k_eff < len(self.ids):
            # everything tied with the k-th best must survive to the tie-break
            cutoff = np.partition(scores, -k_eff)[-k_eff]
            pool = np.flatnonzero(scores >= cutoff)
        else:
            pool = np.arange(len(self.ids))
        return _rank([self.ids[i] for i in pool], scores[pool], k)


def brute_force_query(
    vectors: Sequence[tuple[str, EmbeddingVector]], q: EmbeddingVector, k: int
) -> list[NeighborHit]:
    """Exact top-k by full scan."""
    return ExactScan(vectors).query(q, k)
