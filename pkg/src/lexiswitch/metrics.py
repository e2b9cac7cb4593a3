"""Intrinsic evaluation: edit minimality, semantic faithfulness, and reports.

Edit distance is token-level Levenshtein over the shared tokenizer's
lowercased tokens (punctuation kept). Semantic faithfulness is the cosine
between whole-response embeddings.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

from .embedding import Embedder, cosine_similarity
from .errors import EmptyGroup, EmptyText, LengthMismatch, ZeroVariance
from .extraction import tokenize

Mode = Literal["baseline", "rag", "zero_shot"]
MODES: tuple[str, ...] = ("zero_shot", "rag", "baseline")
MODE_LABELS = {"zero_shot": "Zero-shot", "rag": "RAG", "baseline": "Baseline"}

CONVENTIONS = {
    "tokens": "shared tokenizer, lowercased, punctuation retained",
    "median": "mean of the two middle values for even n",
    "p5": "nearest-rank: the ceil(0.05*n)-th smallest value",
    "thresholds": "inclusive (edits <= 2, edits <= 5)",
    "pearson": "sample correlation of edit distance and cosine per mode",
}


def lowered_tokens(text: str) -> list[str]:
    return [t.lower for t in tokenize(text)]


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Minimum insertions + deletions + substitutions turning ``a`` into ``b``.

    Two-row DP over the shorter sequence: O(len(a) * len(b)) time,
    O(min(len(a), len(b))) space.
    """
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def token_edit_distance(a: str, b: str) -> int:
    return levenshtein(lowered_tokens(a), lowered_tokens(b))


def align(a: Sequence, b: Sequence) -> list[tuple[str, int | None, int | None]]:
    """One minimum-cost alignment of ``a`` to ``b`` from the full DP table.

    Returns ops ``(op, i, j)`` with op in equal/replace/delete/insert; the
    index on the side an op does not touch is ``None``. The backtrace
    prefers the diagonal, then deletion, then insertion.
    """
    n, m = len(a), len(b)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        table[i][0] = i
    for j in range(m + 1):
        table[0][j] = j
    for i in range(1, n + 1):
        row, up = table[i], table[i - 1]
        for j in range(1, m + 1):
            row[j] = min(up[j] + 1, row[j - 1] + 1, up[j - 1] + (a[i - 1] != b[j - 1]))
    ops = []
    i, j = n, m
    while i or j:
        if i and j and table[i][j] == table[i - 1][j - 1] + (a[i - 1] != b[j - 1]):
            ops.append(("equal" if a[i - 1] == b[j - 1] else "replace", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i and table[i][j] == table[i - 1][j] + 1:
            ops.append(("delete", i - 1, None))
            i -= 1
        else:
            ops.append(("insert", None, j - 1))
            j -= 1
    ops.reverse()
    return ops


def changed_spans(ops: Sequence[tuple[str, int | None, int | None]]) -> list[list[tuple]]:
    """Maximal runs of consecutive non-equal ops."""
    spans: list[list[tuple]] = []
    current: list[tuple] = []
    for op in ops:
        if op[0] == "equal":
            if current:
                spans.append(current)
                current = []
        else:
            current.append(op)
    if current:
        spans.append(current)
    return spans


def semantic_similarity(a: str, b: str, embedder: Embedder) -> float:
    """Cosine similarity between response-level embeddings of ``a`` and ``b``."""
    if not a.strip() or not b.strip():
        raise EmptyText("semantic similarity needs two non-empty texts")
    va, vb = embedder.embed([a, b])
    return cosine_similarity(va, vb)


# -- records and aggregates ------------------------------------------------


@dataclass(frozen=True)
class EvalRecord:
    id: str
    mode: str
    original: str
    generated: str
    edit_distance: int
    cosine: float | None = None


def evaluate_pair(id: str, mode: str, original: str, generated: str,
                  embedder: Embedder | None = None) -> EvalRecord:
    cosine = None
    if embedder is not None and original.strip() and generated.strip():
        cosine = semantic_similarity(original, generated, embedder)
    return EvalRecord(id, mode, original, generated,
                      token_edit_distance(original, generated), cosine)


def evaluate_pairs(rows: Iterable[tuple[str, str, str, str]],
                   embedder: Embedder | None = None) -> list[EvalRecord]:
    """Score ``(id, mode, original, generated)`` rows, embedding in one batch."""
    rows = list(rows)
    texts: list[str] = []
    slots: list[int | None] = []
    for _, _, original, generated in rows:
        if embedder is not None and original.strip() and generated.strip():
            slots.append(len(texts))
            texts.extend([original, generated])
        else:
            slots.append(None)
    vectors = embedder.embed(texts) if texts and embedder is not None else []
    records = []
    for (rid, mode, original, generated), slot in zip(rows, slots):
        cosine = None
        if slot is not None:
            cosine = cosine_similarity(vectors[slot], vectors[slot + 1])
        records.append(EvalRecord(rid, mode, original, generated,
                                  token_edit_distance(original, generated), cosine))
    return records


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(xs) != len(ys):
        raise LengthMismatch(len(xs), len(ys))
    n = len(xs)
    if n < 2:
        raise ZeroVariance("need at least two points")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("a variable is constant")
    r = math.fsum(p * q for p, q in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def nearest_rank(values: Sequence[float], pct: float) -> float:
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


@dataclass(frozen=True)
class SummaryStats:
    n: int
    median_edits: float
    mean_edits: float
    pct_le_2: float
    pct_le_5: float
    n_cosine: int
    mean_cosine: float
    median_cosine: float
    p5_cosine: float
    pearson_r: float


def summarize_group(records: Sequence[EvalRecord]) -> SummaryStats:
    if not records:
        raise EmptyGroup()
    edits = [r.edit_distance for r in records]
    n = len(edits)
    paired = [(r.edit_distance, r.cosine) for r in records if r.cosine is not None]
    cosines = [c for _, c in paired]
    nan = float("nan")
    try:
        r = pearson([float(e) for e, _ in paired], cosines)
    except ZeroVariance:
        r = nan
    return SummaryStats(
        n=n,
        median_edits=float(statistics.median(edits)),
        mean_edits=math.fsum(edits) / n,
        pct_le_2=100.0 * sum(e <= 2 for e in edits) / n,
        pct_le_5=100.0 * sum(e <= 5 for e in edits) / n,
        n_cosine=len(cosines),
        mean_cosine=math.fsum(cosines) / len(cosines) if cosines else nan,
        median_cosine=float(statistics.median(cosines)) if cosines else nan,
        p5_cosine=nearest_rank(cosines, 5) if cosines else nan,
        pearson_r=r,
    )


def summarize(records: Sequence[EvalRecord], modes: Iterable[str] | None = None) -> dict[str, SummaryStats]:
    """Per-mode summaries, in the order zero_shot, rag, baseline, then others.

    With ``modes`` given, each listed mode must have at least one record.
    """
    groups: dict[str, list[EvalRecord]] = {}
    for rec in records:
        groups.setdefault(rec.mode, []).append(rec)
    if modes is not None:
        wanted = list(modes)
        for mode in wanted:
            if not groups.get(mode):
                raise EmptyGroup(mode)
    else:
        wanted = [m for m in MODES if m in groups] + sorted(set(groups) - set(MODES))
        if not wanted:
            raise EmptyGroup()
    return {mode: summarize_group(groups[mode]) for mode in wanted}


# -- rendering -------------------------------------------------------------

TABLE1_COLUMNS = ("Method", "N", "Median edits", "Mean edits", "% ≤2 edits", "% ≤5 edits")
TABLE2_COLUMNS = ("Method", "N", "Mean cosine", "Median cosine", "5th percentile")
CSV_COLUMNS = (
    "method", "n", "median_edits", "mean_edits", "pct_le_2", "pct_le_5",
    "n_cosine", "mean_cosine", "median_cosine", "p5_cosine", "pearson_r",
)


def _fmt_median(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:.1f}"


def _fmt(x: float, digits: int) -> str:
    return "nan" if math.isnan(x) else f"{x:.{digits}f}"


def _label(mode: str) -> str:
    return MODE_LABELS.get(mode, mode)


def table1_rows(stats: dict[str, SummaryStats]) -> list[tuple[str, ...]]:
    return [
        (_label(m), str(s.n), _fmt_median(s.median_edits), _fmt(s.mean_edits, 2),
         _fmt(s.pct_le_2, 1), _fmt(s.pct_le_5, 1))
        for m, s in stats.items()
    ]


def table2_rows(stats: dict[str, SummaryStats]) -> list[tuple[str, ...]]:
    return [
        (_label(m), str(s.n_cosine), _fmt(s.mean_cosine, 3), _fmt(s.median_cosine, 3),
         _fmt(s.p5_cosine, 3))
        for m, s in stats.items()
    ]


def _render_table(columns: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(columns)]

    def line(cells):
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join([first, *rest]).rstrip()

    rule = "-" * len(line(columns))
    return [rule, line(columns), rule, *(line(r) for r in rows), rule]


def render_summary_text(stats: dict[str, SummaryStats], x_cap: int | None = None) -> str:
    if not stats:
        raise EmptyGroup()
    out = ["Edit minimality: token-level edit distance between original and generated",
           "responses (lowercased word tokens; punctuation retained)."]
    out += _render_table(TABLE1_COLUMNS, table1_rows(stats))
    out += ["", "Semantic faithfulness: cosine similarity between embeddings of original",
            "and generated responses."]
    out += _render_table(TABLE2_COLUMNS, table2_rows(stats))
    out += ["", "Correlation of edit distance and cosine (Pearson r):"]
    for mode, s in stats.items():
        out.append(f"  {_label(mode)}: {_fmt(s.pearson_r, 2)}")
    out += ["", "Conventions:"]
    out += [f"  {k}: {v}" for k, v in CONVENTIONS.items()]
    if x_cap is not None:
        out.append(f"  scatter: x-axis capped at {x_cap} edits for display; data uncapped")
    return "\n".join(out) + "\n"


def render_summary_csv(stats: dict[str, SummaryStats]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for mode, s in stats.items():
        writer.writerow([mode, *(repr(v) if isinstance(v, float) else v for v in asdict(s).values())])
    return buf.getvalue()


def render_scatter_csv(records: Sequence[EvalRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("mode", "edit_distance", "cosine"))
    for r in records:
        writer.writerow((r.mode, r.edit_distance, "" if r.cosine is None else repr(r.cosine)))
    return buf.getvalue()


def export_report(
    stats: dict[str, SummaryStats],
    records: Sequence[EvalRecord],
    out_dir: str | Path,
    *,
    x_cap: int | None = None,
) -> list[Path]:
    """Write summary.txt, summary.csv, scatter.csv and report_meta.json."""
    if not stats or not records:
        raise EmptyGroup()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "summary.txt": render_summary_text(stats, x_cap),
        "summary.csv": render_summary_csv(stats),
        "scatter.csv": render_scatter_csv(records),
        "report_meta.json": json.dumps(
            {"conventions": CONVENTIONS, "scatter_x_cap": x_cap,
             "modes": list(stats)}, indent=2, ensure_ascii=False) + "\n",
    }
    written = []
    for name, text in files.items():
        path = out / name
        path.write_text(text, encoding="utf-8", newline="\n")
        written.append(path)
    return written
