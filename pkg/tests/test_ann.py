import json
import math
import random

import numpy as np
import pytest

from lexiswitch.ann_index import (
    ExactScan,
    HnswIndex,
    HnswParams,
    assign_levels,
    brute_force_query,
    build_index,
    query,
)
from lexiswitch.embedding import EmbeddingVector
from lexiswitch.errors import (
    DimensionMismatch,
    DuplicateId,
    EmptyIndex,
    EmptyInput,
    MissingFile,
    SnapshotError,
)


def unit(values):
    return EmbeddingVector(values).normalize()


def random_vectors(n, dim, seed, prefix="e"):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return [(f"{prefix}{i:05d}", EmbeddingVector(row, normalized=True)) for i, row in enumerate(x)]


def test_singleton():
    v = unit([1.0, 2.0, 3.0])
    index = build_index([("only", v)])
    hits = index.query(v, 5)
    assert [h.entry_id for h in hits] == ["only"]
    assert hits[0].score == pytest.approx(1.0, abs=1e-12)
    assert hits[0].rank == 1
    assert brute_force_query([("only", v)], v, 1)[0].entry_id == "only"


def test_lexicon_index_has_every_entry(index198, lexicon198):
    assert len(index198) == 198
    assert index198.ids == lexicon198.ids
    assert index198.lexicon_checksum == lexicon198.checksum


def test_stored_vector_finds_itself(index198):
    for i in range(0, 198, 7):
        q = EmbeddingVector(index198.data[i], normalized=True)
        hit = index198.query(q, 1)[0]
        assert hit.entry_id == index198.ids[i]
        assert hit.score == pytest.approx(1.0, abs=1e-6)


def test_k_larger_than_index_returns_all():
    vectors = random_vectors(5, 8, 1)
    hits = build_index(vectors).query(vectors[0][1], 50)
    assert sorted(h.entry_id for h in hits) == [vid for vid, _ in vectors]


def test_hits_sorted_with_consecutive_ranks():
    vectors = random_vectors(300, 16, 2)
    index = build_index(vectors)
    for _, q in random_vectors(20, 16, 3, "q"):
        hits = index.query(q, 10)
        assert [h.rank for h in hits] == list(range(1, 11))
        assert all(a.score >= b.score for a, b in zip(hits, hits[1:]))


def test_ties_break_by_entry_id():
    v = unit([1.0, 0.0, 0.0])
    w = unit([0.0, 1.0, 0.0])
    vectors = [("b", v), ("c", w), ("a", v)]
    hits = build_index(vectors).query(v, 3)
    assert [h.entry_id for h in hits] == ["a", "b", "c"]
    assert [h.entry_id for h in brute_force_query(vectors, v, 2)] == ["a", "b"]


def test_orthonormal_basis():
    basis = [(f"e{i + 1}", EmbeddingVector(np.eye(4)[i], normalized=True)) for i in range(4)]
    hit = brute_force_query(basis, basis[1][1], 1)[0]
    assert (hit.entry_id, hit.score) == ("e2", 1.0)
    assert build_index(basis).query(basis[1][1], 1)[0].entry_id == "e2"


def _independent_scan(vectors, q, k):
    scored = []
    for entry_id, v in vectors:
        s = math.fsum(a * b for a, b in zip(v.values.tolist(), q.values.tolist()))
        scored.append((-s, entry_id))
    scored.sort()
    return [(entry_id, -neg) for neg, entry_id in scored[:k]]


def test_brute_force_matches_independent_scan():
    rng = random.Random(100)
    for case in range(100):
        n, dim, k = rng.randint(1, 60), rng.randint(2, 12), rng.randint(1, 15)
        vectors = random_vectors(n, dim, case)
        # a few exact duplicates exercise the tie rule
        if n > 3:
            vectors[1] = ("dup-" + vectors[1][0], vectors[0][1])
        q = random_vectors(1, dim, 1000 + case, "q")[0][1]
        got = [(h.entry_id, h.score) for h in brute_force_query(vectors, q, k)]
        want = _independent_scan(vectors, q, k)
        assert [g[0] for g in got] == [w[0] for w in want]
        assert [g[1] for g in got] == pytest.approx([w[1] for w in want], abs=1e-12)


def test_build_is_deterministic():
    vectors = random_vectors(500, 24, 5)
    probes = [q for _, q in random_vectors(100, 24, 6, "q")]
    a, b = build_index(vectors), build_index(vectors)
    assert np.array_equal(a.nbrs, b.nbrs)
    for q in probes:
        assert a.query(q, 5) == b.query(q, 5)


def test_seed_changes_levels():
    assert not np.array_equal(assign_levels(500, 16, 1), assign_levels(500, 16, 2))
    assert np.array_equal(assign_levels(500, 16, 1), assign_levels(500, 16, 1))


def test_level_distribution_is_geometric():
    levels = assign_levels(200_000, 16, 42)
    frac = (levels >= 1).mean()
    assert frac == pytest.approx(1 / 16, rel=0.05)
    assert (levels >= 2).mean() == pytest.approx(1 / 256, rel=0.15)


def test_degree_caps():
    params = HnswParams(m=4, ef_construction=32)
    index = build_index(random_vectors(400, 8, 9), params)
    assert index.cnt[0].max() <= 2 * params.m
    for layer in range(1, index.max_level + 1):
        assert index.cnt[layer].max() <= params.m
    # no self loops, no duplicate links
    for node in range(len(index)):
        links = index.neighbors(node)
        assert node not in links
        assert len(links) == len(set(links))


def test_small_index_is_exact(index198, embedder, lexicon198):
    vectors = list(zip(index198.ids, (EmbeddingVector(r, normalized=True) for r in index198.data)))
    scan = ExactScan(vectors)
    for text in ["tired", "coffee", "to eat", "stingy person", "lucky"]:
        q = embedder.embed_one(text)
        assert index198.query(q, 5) == scan.query(q, 5)


def test_input_errors():
    v3 = unit([1.0, 0.0, 0.0])
    with pytest.raises(EmptyInput):
        build_index([])
    with pytest.raises(DimensionMismatch):
        build_index([("a", v3), ("b", unit([1.0, 0.0]))])
    with pytest.raises(DuplicateId):
        build_index([("a", v3), ("a", v3)])
    with pytest.raises(ValueError):
        build_index([("a", EmbeddingVector([2.0, 0.0, 0.0]))])
    index = build_index([("a", v3)])
    with pytest.raises(DimensionMismatch):
        index.query(unit([1.0, 0.0]), 1)
    with pytest.raises(ValueError):
        index.query(v3, 0)
    with pytest.raises(EmptyIndex):
        ExactScan([])


@pytest.mark.parametrize("kwargs", [
    {"m": 1}, {"m": 16, "ef_construction": 8}, {"ef_search": 0}, {"seed": -1},
])
def test_param_invariants(kwargs):
    with pytest.raises(ValueError):
        HnswParams(**kwargs)


def test_snapshot_round_trip(tmp_path, index198, embedder):
    path = tmp_path / "index.json"
    index198.save(path)
    loaded = HnswIndex.load(path)
    assert loaded.ids == index198.ids
    assert loaded.lexicon_checksum == index198.lexicon_checksum
    assert loaded.params == index198.params
    assert np.array_equal(loaded.cnt, index198.cnt)
    for text in ["tired", "food", "nervous", "pretty", "run away"]:
        q = embedder.embed_one(text)
        assert query(loaded, q, 5) == query(index198, q, 5)
    # re-saving is byte-stable
    again = tmp_path / "again.json"
    loaded.save(again)
    assert again.read_bytes() == path.read_bytes()


def test_snapshot_errors(tmp_path, index198):
    with pytest.raises(MissingFile):
        HnswIndex.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    with pytest.raises(SnapshotError):
        HnswIndex.load(bad)
    snap = index198.to_snapshot()
    with pytest.raises(SnapshotError):
        HnswIndex.from_snapshot({**snap, "format": "other"})
    with pytest.raises(SnapshotError):
        HnswIndex.from_snapshot({**snap, "version": 99})
    with pytest.raises(SnapshotError):
        HnswIndex.from_snapshot({**snap, "dim": 3})
    json.dumps(snap)  # plain JSON types only
