"""Command-line entry point: ``lexiswitch {index,rewrite,eval,chat}``.

Exit codes: 0 success, 1 usage, 2 provider failure, 3 data error.
Secrets are read from the environment only (``LEXISWITCH_API_KEY``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import TextIO

from .ann_index import HnswIndex, HnswParams, build_index
from .chat import ChatProviderConfig, ScriptedChatProvider, make_chat_provider
from .embedding import (
    BASE_URL_ENV,
    EmbeddingProviderConfig,
    ProviderLimiter,
    make_embedder,
)
from .errors import DataError, MissingFile, ParseError, ProviderFailure
from .lexicon import Lexicon, entry_text_for_embedding, load_lexicon, load_lexicon_csv
from .metrics import evaluate_pairs, export_report, summarize
from .pipeline import RewritePipeline, RewriteTrace, VarietyConfig

log = logging.getLogger("lexiswitch")

EXIT_OK, EXIT_USAGE, EXIT_PROVIDER, EXIT_DATA = 0, 1, 2, 3

INDEX_FILE = "index.json"
TRACES_FILE = "traces.jsonl"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- shared option groups --------------------------------------------------


def _add_embed_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--embed-endpoint", help="OpenAI-compatible embeddings base URL")
    p.add_argument("--embed-model", default=None, help="embedding model name")
    p.add_argument("--embed-dim", type=int, default=None,
                   help="embedding dimension (default 256, or the index's dimension)")


def _add_chat_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("baseline", "rag", "zero-shot"), default="rag")
    p.add_argument("--lexicon", help="lexicon JSONL (or CSV) file; needed for rag")
    p.add_argument("--index", help="index snapshot built by 'lexiswitch index'; needed for rag")
    p.add_argument("--endpoint", help=f"chat completions base URL (or ${BASE_URL_ENV})")
    p.add_argument("--model", default="gpt-4o-mini", help="chat model name")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--script", help="scripted provider JSON, for offline runs")
    p.add_argument("--k-per-word", type=int, default=1)
    p.add_argument("--min-score", type=float, default=0.35)
    p.add_argument("--particles", help="file with one blocklisted particle per line")
    p.add_argument("--always-call", action="store_true",
                   help="call the rewrite model even when no cues were retrieved")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--concurrency", type=int, default=4)
    _add_embed_opts(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lexiswitch", description="Lexicon-grounded code-switching rewrites.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="embed a lexicon and build its ANN index")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--out", required=True, help=f"output directory; writes {INDEX_FILE}")
    p.add_argument("--embed-policy", choices=("gloss", "word", "word+gloss"), default="gloss")
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--ef-construction", type=int, default=200)
    p.add_argument("--ef-search", type=int, default=64)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--concurrency", type=int, default=4)
    _add_embed_opts(p)

    p = sub.add_parser("rewrite", help="run one condition over a text or an input file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text", help="a single user message")
    src.add_argument("--input", help="JSONL with id and text/context/base fields")
    p.add_argument("--rewrite-only", action="store_true",
                   help="treat each text as an existing Standard English response")
    p.add_argument("--out", help=f"output directory; writes {TRACES_FILE} (default: stdout)")
    _add_chat_opts(p)

    p = sub.add_parser("eval", help="score traces or pairs and write report files")
    p.add_argument("--input", required=True, help="trace JSONL, or pairs JSONL/CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--x-cap", type=int, default=None,
                   help="scatter x-axis cap, recorded as metadata only")
    p.add_argument("--concurrency", type=int, default=4)
    _add_embed_opts(p)

    p = sub.add_parser("chat", help="interactive session on standard input")
    _add_chat_opts(p)
    return parser


# -- resource construction -------------------------------------------------


def _embed_config(args, default_dim: int = 256, index: HnswIndex | None = None) -> EmbeddingProviderConfig:
    recorded = index.embedder if index is not None else {}
    dim = args.embed_dim or recorded.get("dim") or default_dim
    if args.embed_endpoint:
        return EmbeddingProviderConfig(kind="remote", endpoint=args.embed_endpoint,
                                       model_name=args.embed_model or "text-embedding-3-small",
                                       dim=dim, concurrency=args.concurrency)
    if recorded.get("kind", "deterministic") != "deterministic":
        raise UsageError("index was built with a remote embedder; pass --embed-endpoint")
    return EmbeddingProviderConfig(kind="deterministic", dim=dim,
                                   model_name=args.embed_model or "char3-hash")


def _load_lexicon(path: str) -> Lexicon:
    if path.lower().endswith(".csv"):
        return load_lexicon_csv(path)
    return load_lexicon(path)


def _chat_provider(args):
    if args.script:
        return ScriptedChatProvider.from_file(args.script, model_name=args.model,
                                              temperature=args.temperature, seed=args.seed)
    endpoint = args.endpoint or os.environ.get(BASE_URL_ENV)
    if not endpoint:
        raise UsageError(f"no chat provider: pass --endpoint, set ${BASE_URL_ENV}, or pass --script")
    cfg = ChatProviderConfig(kind="remote", endpoint=endpoint, model_name=args.model,
                             temperature=args.temperature, seed=args.seed)
    return make_chat_provider(cfg)


def _read_particles(path: str | None) -> frozenset[str] | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    words = []
    for line in p.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            words.append(line.lower())
    return frozenset(words)


def _pipeline(args) -> RewritePipeline:
    particles = _read_particles(args.particles)
    variety = VarietyConfig(
        k_per_word=args.k_per_word, min_retrieval_score=args.min_score,
        **({"particle_blocklist": particles} if particles is not None else {}),
    )
    lexicon = index = embedder = None
    if args.mode == "rag":
        if not args.lexicon or not args.index:
            raise UsageError("rag mode needs --lexicon and --index (build one with 'lexiswitch index')")
        lexicon = _load_lexicon(args.lexicon)
        index = HnswIndex.load(args.index)
        embedder = make_embedder(_embed_config(args, index=index))
    extra = {"model": args.model, "temperature": args.temperature, "seed": args.seed,
             "scripted": bool(args.script)}
    if embedder is not None:
        extra["embedder"] = index.embedder
    return RewritePipeline(_chat_provider(args), lexicon, index, embedder, variety,
                           short_circuit=not args.always_call, extra_settings=extra)


def _mode(args) -> str:
    return args.mode.replace("-", "_")


# -- commands --------------------------------------------------------------


def cmd_index(args, stdout: TextIO) -> int:
    lexicon = _load_lexicon(args.lexicon)
    cfg = _embed_config(args)
    embedder = make_embedder(cfg)
    vectors = embedder.embed([entry_text_for_embedding(e, args.embed_policy) for e in lexicon])
    params = HnswParams(m=args.m, ef_construction=args.ef_construction,
                        ef_search=args.ef_search, seed=args.seed)
    index = build_index(list(zip(lexicon.ids, vectors)), params,
                        lexicon_checksum=lexicon.checksum,
                        embedder={**cfg.describe(), "policy": args.embed_policy})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index.save(out / INDEX_FILE)
    print(f"indexed {len(index)} entries -> {out / INDEX_FILE}", file=stdout)
    return EXIT_OK


def _read_items(path: str, rewrite_only: bool) -> list[dict]:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    items = []
    for n, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(n, f"invalid JSON: {exc.msg}", str(p)) from None
        if not isinstance(rec, dict):
            raise ParseError(n, "expected a JSON object", str(p))
        items.append(_item(rec, n, str(p), rewrite_only))
    return items


def _item(rec: dict, n: int, path: str, rewrite_only: bool) -> dict:
    rid = str(rec.get("id", f"item-{n}"))
    context = rec.get("context")
    text = rec.get("text")
    base = rec.get("base")
    if context is None and text is not None:
        context = [{"role": "user", "content": text}]
    if rewrite_only and base is None:
        base = text
    if context is None and base is None:
        raise ParseError(n, "need one of 'text', 'context' or 'base'", path)
    if context is not None:
        ok = isinstance(context, list) and all(
            isinstance(m, dict) and isinstance(m.get("role"), str) and isinstance(m.get("content"), str)
            for m in context)
        if not ok:
            raise ParseError(n, "'context' must be a list of {role, content} objects", path)
    return {"id": rid, "context": context or [], "base": base}


def cmd_rewrite(args, stdout: TextIO) -> int:
    mode = _mode(args)
    if args.rewrite_only and mode == "zero_shot":
        raise UsageError("--rewrite-only does not apply to zero-shot mode")
    if args.text is not None:
        items = [_item({"id": "text", "text": args.text}, 1, "--text", args.rewrite_only)]
    else:
        items = _read_items(args.input, args.rewrite_only)
    if mode == "zero_shot" and any(not it["context"] for it in items):
        raise UsageError("zero-shot mode needs a user message for every item")
    pipe = _pipeline(args)
    traces = pipe.run_batch(mode, items, concurrency=args.concurrency)
    text = "".join(t.to_json() + "\n" for t in traces)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / TRACES_FILE).write_text(text, encoding="utf-8", newline="\n")
        print(f"wrote {len(traces)} traces -> {out / TRACES_FILE}", file=stdout)
    else:
        stdout.write(text)
    return EXIT_OK


def read_eval_rows(path: str | Path) -> list[tuple[str, str, str, str]]:
    """``(id, mode, original, generated)`` rows from traces or a pairs file."""
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".csv":
        return _read_pairs_csv(text, str(p))
    rows = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(n, f"invalid JSON: {exc.msg}", str(p)) from None
        if not isinstance(rec, dict):
            raise ParseError(n, "expected a JSON object", str(p))
        if "final_response" in rec:
            keys = ("id", "mode", "base_response", "final_response")
        else:
            keys = ("id", "mode", "original", "generated")
        missing = [k for k in keys[1:] if not isinstance(rec.get(k), str)]
        if missing:
            raise ParseError(n, f"missing or non-text field(s): {', '.join(missing)}", str(p))
        rows.append((str(rec.get("id", n)), rec[keys[1]], rec[keys[2]], rec[keys[3]]))
    return rows


def _read_pairs_csv(text: str, path: str) -> list[tuple[str, str, str, str]]:
    reader = csv.DictReader(io.StringIO(text))
    need = {"id", "mode", "original", "generated"}
    if not reader.fieldnames or not need <= set(reader.fieldnames):
        raise ParseError(1, f"CSV header must include {', '.join(sorted(need))}", path)
    rows = []
    for rec in reader:
        if any(rec.get(k) is None for k in need):
            raise ParseError(reader.line_num, "too few columns", path)
        rows.append((rec["id"], rec["mode"], rec["original"], rec["generated"]))
    return rows


def cmd_eval(args, stdout: TextIO) -> int:
    rows = read_eval_rows(args.input)
    embedder = make_embedder(_embed_config(args))
    records = evaluate_pairs(rows, embedder)
    stats = summarize(records)
    for path in export_report(stats, records, args.out, x_cap=args.x_cap):
        print(f"wrote {path}", file=stdout)
    return EXIT_OK


def cmd_chat(args, stdout: TextIO, stdin: TextIO) -> int:
    mode = _mode(args)
    pipe = _pipeline(args)
    context: list[dict] = []
    last: RewriteTrace | None = None
    turn = 0
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        if line == "/quit":
            break
        if line == "/trace":
            if last is None:
                print("(no trace yet)", file=stdout)
            else:
                print(json.dumps(last.to_dict(), ensure_ascii=False, indent=2), file=stdout)
            continue
        turn += 1
        context.append({"role": "user", "content": line})
        last = pipe.run(mode, context, id=f"turn-{turn}")
        context.append({"role": "assistant", "content": last.final_response})
        print(last.final_response, file=stdout)
        stdout.flush()
    return EXIT_OK


def main(argv: list[str] | None = None, *, stdin: TextIO | None = None,
         stdout: TextIO | None = None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "concurrency", 1) < 1:
            raise UsageError("--concurrency must be >= 1")
        ProviderLimiter.configure(args.concurrency)
        if args.command == "index":
            return cmd_index(args, stdout)
        if args.command == "rewrite":
            return cmd_rewrite(args, stdout)
        if args.command == "eval":
            return cmd_eval(args, stdout)
        return cmd_chat(args, stdout, stdin)
    except (UsageError, ValueError) as exc:
        print(f"lexiswitch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProviderFailure as exc:
        print(f"lexiswitch: provider failure: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except DataError as exc:
        print(f"lexiswitch: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
