import csv
import hashlib
import io
import json
import math
import random
import re
import unicodedata

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, GOLDEN
from lexiswitch.embedding import HashingEmbedder
from lexiswitch.errors import EmptyGroup, EmptyText, LengthMismatch, ZeroVariance
from lexiswitch.metrics import (
    CSV_COLUMNS,
    EvalRecord,
    align,
    changed_spans,
    evaluate_pair,
    evaluate_pairs,
    export_report,
    levenshtein,
    nearest_rank,
    pearson,
    render_scatter_csv,
    semantic_similarity,
    summarize,
    table1_rows,
    table2_rows,
    token_edit_distance,
)


def rec(edits, cos=None, mode="rag", i=0):
    return EvalRecord(f"r{i}", mode, "a", "b", edits, cos)


# -- edit distance --------------------------------------------------------


def test_edit_distance_examples():
    assert token_edit_distance("that sounds really exhausting", "that sounds really exhausting") == 0
    assert token_edit_distance("that sounds really exhausting", "that sounds really sian") == 1
    assert token_edit_distance("", "") == 0
    assert token_edit_distance("", "one two") == 2


def test_case_insensitive_punctuation_sensitive():
    assert token_edit_distance("Hello World", "hello world") == 0
    assert token_edit_distance("hello, world", "hello; world") == 1
    assert token_edit_distance("hello world", "hello world!") == 1


words = st.lists(st.sampled_from(["a", "B", "b", "c", ",", "dd", "!"]), max_size=9).map(" ".join)


@settings(max_examples=300, deadline=None)
@given(words, words, words)
def test_edit_distance_is_a_metric(a, b, c):
    ab = token_edit_distance(a, b)
    assert ab == token_edit_distance(b, a)
    assert (ab == 0) == (a.lower().split() == b.lower().split())
    assert token_edit_distance(a, c) <= ab + token_edit_distance(b, c)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 3), max_size=10), st.lists(st.integers(0, 3), max_size=10))
def test_alignment_cost_equals_distance(a, b):
    ops = align(a, b)
    cost = sum(op != "equal" for op, _, _ in ops)
    assert cost == levenshtein(a, b)
    # the ops replay a into b
    out = []
    for op, i, j in ops:
        if op == "equal":
            assert a[i] == b[j]
            out.append(a[i])
        elif op in ("replace", "insert"):
            out.append(b[j])
    assert out == b
    assert [i for _, i, _ in ops if i is not None] == list(range(len(a)))


def test_changed_spans():
    ops = align(list("abcdef"), list("aXcdYf"))
    assert [[o[0] for o in s] for s in changed_spans(ops)] == [["replace"], ["replace"]]
    ops = align("You must try".split(), "You die die must try".split())
    assert len(changed_spans(ops)) == 1


# -- semantic similarity --------------------------------------------------


def test_semantic_similarity(embedder):
    assert semantic_similarity("same text", "same text", embedder) == pytest.approx(1.0, abs=1e-6)
    s = semantic_similarity("hawker food", "quantum entanglement", embedder)
    assert -1.0 <= s < 1.0
    with pytest.raises(EmptyText):
        semantic_similarity("", "x", embedder)


def _oracle_embed(text, dim=256):
    """Second implementation of the documented deterministic embedder."""
    canon = " ".join(unicodedata.normalize("NFC", text).split())
    padded = " " + canon + " "
    acc = [0.0] * dim
    for i in range(len(padded) - 2):
        d = hashlib.blake2b(padded[i:i + 3].encode("utf-8"), digest_size=16).digest()
        h = int.from_bytes(d[:8], "little")
        w = 1.0 + int.from_bytes(d[8:], "little") / 2.0 ** 65
        acc[(h >> 1) % dim] += w if h & 1 else -w
    norm = math.sqrt(math.fsum(x * x for x in acc))
    return [x / norm for x in acc]


def _oracle_cosine(a, b):
    va, vb = _oracle_embed(a), _oracle_embed(b)
    return math.fsum(x * y for x, y in zip(va, vb))


# frozen from the oracle above
FROZEN_PAIR = ("Hi there, that sounds really exhausting.", "Hi there, that sounds really sian.")
FROZEN_COSINE = 0.7770780602315162


def test_fixture_pair_cosine(embedder):
    assert _oracle_cosine(*FROZEN_PAIR) == pytest.approx(FROZEN_COSINE, abs=1e-12)
    assert semantic_similarity(*FROZEN_PAIR, embedder) == pytest.approx(FROZEN_COSINE, abs=1e-9)


def test_evaluate_pairs_matches_single(embedder):
    rows = [("a", "rag", "I am tired.", "I am sian."), ("b", "baseline", "Hi.", "Hi."),
            ("c", "rag", "x", "")]
    batch = evaluate_pairs(rows, embedder)
    assert batch[:2] == [evaluate_pair(*rows[0], embedder), evaluate_pair(*rows[1], embedder)]
    assert batch[2].cosine is None and batch[2].edit_distance == 1


# -- statistics -----------------------------------------------------------


def test_summarize_small_example():
    stats = summarize([rec(1, 0.9), rec(1, 0.95), rec(2, 1.0)])["rag"]
    assert stats.n == 3
    assert stats.median_edits == 1
    assert stats.mean_edits == pytest.approx(4 / 3)
    assert stats.pct_le_2 == 100.0
    assert table1_rows({"rag": stats}) == [("RAG", "3", "1", "1.33", "100.0", "100.0")]


def test_collinear_pearson():
    stats = summarize([rec(3, 0.9), rec(2, 0.95), rec(1, 1.0)])["rag"]
    assert stats.pearson_r == pytest.approx(-1.0, abs=1e-12)


def test_even_median_and_percentiles():
    stats = summarize([rec(e, c) for e, c in [(1, 0.1), (2, 0.2), (4, 0.3), (9, 0.4)]])["rag"]
    assert stats.median_edits == 3.0
    assert stats.median_cosine == pytest.approx(0.25)
    assert stats.p5_cosine == 0.1
    assert stats.pct_le_2 == 50.0 and stats.pct_le_5 == 75.0
    assert table1_rows({"rag": stats})[0][2] == "3"


def test_nearest_rank():
    values = list(range(1, 101))
    assert nearest_rank(values, 5) == 5
    assert nearest_rank(values[:19], 5) == 1
    assert nearest_rank(values[:21], 5) == 2
    assert nearest_rank([7.0], 5) == 7.0


def test_pearson_fixtures():
    xs = [1.0, 2.0, 4.0, 7.0]
    assert pearson(xs, [2 * x for x in xs]) == pytest.approx(1.0, abs=1e-12)
    assert pearson(xs, [-x + 7 for x in xs]) == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(LengthMismatch):
        pearson([1, 2], [1, 2, 3])
    with pytest.raises(ZeroVariance):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ZeroVariance):
        pearson([1], [1])


def test_pearson_matches_direct_formula():
    rng = random.Random(50)
    xs = [rng.gauss(0, 3) for _ in range(50)]
    ys = [0.3 * x + rng.gauss(0, 1) for x in xs]
    mx, my = sum(xs) / 50, sum(ys) / 50
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / 49
    sx = math.sqrt(sum((x - mx) ** 2 for x in xs) / 49)
    sy = math.sqrt(sum((y - my) ** 2 for y in ys) / 49)
    assert abs(pearson(xs, ys) - cov / (sx * sy)) <= 1e-12
    assert abs(pearson(xs, ys) - np.corrcoef(xs, ys)[0, 1]) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.floats(-1, 1)), min_size=3, max_size=30),
       st.floats(0.1, 10), st.floats(-5, 5), st.floats(0.1, 10), st.floats(-5, 5))
def test_pearson_affine_invariance(points, a, b, c, d):
    xs = [float(p[0]) for p in points]
    ys = [p[1] for p in points]
    try:
        r = pearson(xs, ys)
        r2 = pearson([a * x + b for x in xs], [c * y + d for y in ys])
    except ZeroVariance:
        return
    if min(np.std(xs), np.std(ys)) < 1e-6:
        return  # affine maps can round a near-constant sample to constant
    assert r2 == pytest.approx(r, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 12), st.floats(-1, 1), st.sampled_from(["rag", "zero_shot"])),
                min_size=1, max_size=25), st.randoms(use_true_random=False))
def test_summarize_is_permutation_invariant(rows, rnd):
    records = [rec(e, c, m, i) for i, (e, c, m) in enumerate(rows)]
    shuffled = records[:]
    rnd.shuffle(shuffled)
    a, b = summarize(records), summarize(shuffled)
    assert list(a) == list(b)
    for mode in a:
        for key, value in vars(a[mode]).items():
            other = getattr(b[mode], key)
            if isinstance(value, float) and math.isnan(value):
                assert math.isnan(other)
            else:
                assert other == pytest.approx(value, abs=1e-12)
        assert 0 <= a[mode].pct_le_2 <= a[mode].pct_le_5 <= 100
        assert a[mode].p5_cosine <= a[mode].median_cosine


def test_empty_groups():
    with pytest.raises(EmptyGroup):
        summarize([])
    with pytest.raises(EmptyGroup) as err:
        summarize([rec(1, 0.5)], modes=["rag", "zero_shot"])
    assert err.value.mode == "zero_shot"
    with pytest.raises(EmptyGroup):
        export_report({}, [], "unused")


def test_mode_order_and_table2():
    records = [rec(0, 1.0, "baseline"), rec(1, 0.9, "rag"), rec(9, 0.4, "zero_shot")]
    stats = summarize(records)
    assert list(stats) == ["zero_shot", "rag", "baseline"]
    assert [r[0] for r in table2_rows(stats)] == ["Zero-shot", "RAG", "Baseline"]
    assert table2_rows(stats)[1] == ("RAG", "1", "0.900", "0.900", "0.900")


def test_scatter_csv_is_uncapped():
    text = render_scatter_csv([rec(120, 0.2), rec(1, None)])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows == [["mode", "edit_distance", "cosine"], ["rag", "120", "0.2"], ["rag", "1", ""]]


# -- golden report on a seeded 200-record corpus -------------------------


def _load_pairs():
    lines = (FIXTURES / "pairs_200.jsonl").read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines]


def test_golden_report_bytes(tmp_path, embedder):
    rows = [(p["id"], p["mode"], p["original"], p["generated"]) for p in _load_pairs()]
    records = evaluate_pairs(rows, embedder)
    export_report(summarize(records), records, tmp_path, x_cap=30)
    for name in ("summary.txt", "summary.csv", "scatter.csv", "report_meta.json"):
        assert (tmp_path / name).read_bytes() == (GOLDEN / "report_200" / name).read_bytes(), name


def _oracle_edits(a, b):
    ta = [t.lower() for t in re.findall(r"\w+(?:[.,]\d+)*|[^\w\s]", a)]
    tb = [t.lower() for t in re.findall(r"\w+(?:[.,]\d+)*|[^\w\s]", b)]
    prev = list(range(len(tb) + 1))
    for i, x in enumerate(ta, 1):
        cur = [i]
        for j, y in enumerate(tb, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def test_golden_report_agrees_with_oracle():
    """Numbers in the frozen golden CSV equal an independent recomputation."""
    groups = {}
    for p in _load_pairs():
        if "'" in p["original"] + p["generated"] or "’" in p["original"] + p["generated"]:
            edits = token_edit_distance(p["original"], p["generated"])  # contractions: shared rule
        else:
            edits = _oracle_edits(p["original"], p["generated"])
        groups.setdefault(p["mode"], []).append((edits, _oracle_cosine(p["original"], p["generated"])))

    golden = list(csv.DictReader(io.StringIO(
        (GOLDEN / "report_200" / "summary.csv").read_text(encoding="utf-8"))))
    assert [row["method"] for row in golden] == ["zero_shot", "rag", "baseline"]
    assert list(golden[0]) == list(CSV_COLUMNS)
    for row in golden:
        pts = groups[row["method"]]
        e = np.array([p[0] for p in pts], dtype=float)
        c = np.array([p[1] for p in pts])
        assert int(row["n"]) == len(pts)
        assert float(row["median_edits"]) == np.median(e)
        assert float(row["mean_edits"]) == pytest.approx(e.mean(), abs=1e-12)
        assert float(row["pct_le_2"]) == pytest.approx(100 * (e <= 2).mean(), abs=1e-12)
        assert float(row["pct_le_5"]) == pytest.approx(100 * (e <= 5).mean(), abs=1e-12)
        assert float(row["mean_cosine"]) == pytest.approx(c.mean(), abs=1e-9)
        assert float(row["median_cosine"]) == pytest.approx(np.median(c), abs=1e-9)
        assert float(row["p5_cosine"]) == pytest.approx(
            np.percentile(c, 5, method="inverted_cdf"), abs=1e-9)
        if e.std() > 0:
            assert float(row["pearson_r"]) == pytest.approx(np.corrcoef(e, c)[0, 1], abs=1e-9)
        else:
            assert math.isnan(float(row["pearson_r"]))
