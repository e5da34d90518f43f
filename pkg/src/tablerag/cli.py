"""``tablerag`` command line: ingest, tables, enrich, query, eval, compare.

Data goes to stdout, diagnostics to stderr. Exit status is 0 on success
and 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from .config import ConfigError, RunConfig, load_config
from .enrich import PromptTemplate, concat_enrich_table, llm_enrich_table
from .evaluation import EvalIncomplete, QuerySetError, compare_modes, load_queries, run_eval
from .index import IndexStoreError, VectorIndex
from .llm_gateway import GatewayError, make_gateway
from .pdf_layer import PdfError, SourceDocument, open_document
from .rag import PipelineMode, answer, build_chunks, provenance
from .table_detect import detect_tables

log = logging.getLogger("tablerag")


class CliError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"tablerag: {msg}", file=sys.stderr)


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "mode", None):
        overrides["mode"] = PipelineMode.parse(args.mode)
    if getattr(args, "index", None):
        overrides["index_path"] = Path(args.index)
    if getattr(args, "k", None) is not None:
        overrides["k"] = args.k
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _open_index(cfg: RunConfig, embedder, must_exist: bool) -> VectorIndex:
    path = cfg.index_path
    if not path.exists():
        if must_exist:
            raise CliError(f"index file {path} does not exist; run 'tablerag ingest' first")
        return VectorIndex(embedder.dim, embedder.embedder_id)
    index = VectorIndex.load(path)
    if (index.embedder_id, index.dim) != (embedder.embedder_id, embedder.dim):
        raise CliError(
            f"index {path} was built with {index.embedder_id}/{index.dim}, config asks for {embedder.embedder_id}/{embedder.dim}"
        )
    return index


def _enrichment_gateway(cfg: RunConfig, mode: PipelineMode):
    return make_gateway(cfg.enrichment) if mode is PipelineMode.LLM else None


def cmd_ingest(args) -> int:
    cfg = _config(args)
    embedder = cfg.make_embedder()
    index = _open_index(cfg, embedder, must_exist=False)
    gateway = _enrichment_gateway(cfg, cfg.mode)
    options = cfg.ingest_options()

    def prepare(path: str):
        doc = open_document(path)
        return doc, build_chunks(doc, cfg.mode, gateway, options)

    def guarded(path: str):
        try:
            return prepare(path), None
        except (PdfError, GatewayError, ValueError) as exc:
            return None, exc

    with ThreadPoolExecutor(cfg.jobs) as pool:
        outcomes = list(pool.map(guarded, args.pdfs))
    failures = 0
    for path, (prepared, exc) in zip(args.pdfs, outcomes):
        if exc is not None:
            failures += 1
            _err(f"{path}: {exc.cause if isinstance(exc, PdfError) else exc}")
            continue
        doc, (chunks, stats) = prepared
        index.remove_doc(doc.doc_id)
        for chunk in chunks:
            index.upsert(chunk, embedder.embed(chunk.text))
        print(json.dumps({"path": path, **stats.to_json()}))
    index.persist(cfg.index_path)
    return 1 if failures else 0


def _load_doc(path: str) -> SourceDocument:
    return open_document(path)


def _select_pages(doc: SourceDocument, page: int | None):
    if page is None:
        return doc.pages
    if not 0 <= page < len(doc.pages):
        raise CliError(f"--page {page} out of range; valid pages are 0..{len(doc.pages) - 1}")
    return [doc.pages[page]]


def cmd_tables(args) -> int:
    cfg = _config(args)
    doc = _load_doc(args.pdf)
    grids = [g for p in _select_pages(doc, args.page) for g in detect_tables(p, cfg.detection, doc.doc_id)]
    if args.format == "json":
        print(json.dumps([g.to_json() for g in grids], indent=2, ensure_ascii=False))
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for n, g in enumerate(grids):
            if n:
                buf.write("\n")
            buf.write(f"# doc_id={g.doc_id} page_index={g.page_index} table_index={g.table_index} header_rows={g.header_rows}\n")
            writer.writerows(g.texts())
        sys.stdout.write(buf.getvalue())
    print(f"{len(grids)} tables", file=sys.stderr)
    return 0


def cmd_enrich(args) -> int:
    cfg = _config(args)
    doc = _load_doc(args.pdf)
    grids = [g for p in doc.pages for g in detect_tables(p, cfg.detection, doc.doc_id)]
    gateway = make_gateway(cfg.enrichment) if args.llm else None
    template = PromptTemplate.load(cfg.enrich_prompt)
    for g in grids:
        if gateway is None:
            rows = concat_enrich_table(g)
        else:
            outcome = llm_enrich_table(g, gateway, template, cfg.enrichment.model_id, cfg.enrichment.max_tokens)
            if outcome.fallback:
                _err(f"page {g.page_index} table {g.table_index}: fell back to concat rows ({outcome.reason})")
            rows = outcome.rows
        for row in rows:
            print(json.dumps(row.to_json(), ensure_ascii=False))
    return 0


def cmd_query(args) -> int:
    cfg = _config(args)
    embedder = cfg.make_embedder()
    index = _open_index(cfg, embedder, must_exist=False)
    if not len(index):
        _err("warning: index is empty; answering without context")
    ans = answer(
        args.question,
        index,
        embedder,
        make_gateway(cfg.generator),
        cfg.k,
        cfg.answer_template(),
        cfg.generator.model_id,
        cfg.generator.max_tokens,
        cfg.mode,
    )
    print(ans.text)
    for rank, (cid, score) in enumerate(ans.supporting, 1):
        print(f"[{rank}] score={score:.6f} {provenance(index.get(cid))}")
    return 0


def _write_out(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")


def cmd_eval(args) -> int:
    cfg = _config(args)
    cases = load_queries(args.queries)
    embedder = cfg.make_embedder()
    index = _open_index(cfg, embedder, must_exist=True)
    try:
        report = run_eval(
            cases, cfg.mode, index, embedder, make_gateway(cfg.generator), cfg.k, cfg.answer_template(), cfg.generator.model_id, cfg.jobs
        )
        status = 0
    except EvalIncomplete as exc:
        _err(str(exc))
        report, status = exc.report, 1
    sys.stdout.write(report.render_text())
    _write_out(args.out, json.dumps(report.to_json(with_results=True), indent=2, sort_keys=True) + "\n")
    return status


def cmd_compare(args) -> int:
    cfg = _config(args)
    cases = load_queries(args.queries)
    modes = [PipelineMode.parse(m) for m in args.modes.split(",") if m.strip()]
    corpus_dir = Path(args.corpus)
    if not corpus_dir.is_dir():
        raise CliError(f"corpus directory {corpus_dir} does not exist")
    pdfs = sorted(corpus_dir.glob("*.pdf"))
    if not pdfs:
        raise CliError(f"no PDF files in {corpus_dir}")
    with ThreadPoolExecutor(cfg.jobs) as pool:
        corpus = list(pool.map(open_document, pdfs))
    enrichment = make_gateway(cfg.enrichment) if PipelineMode.LLM in modes else None
    try:
        comparison = compare_modes(
            cases,
            modes,
            corpus,
            cfg.make_embedder,
            make_gateway(cfg.generator),
            enrichment,
            cfg.ingest_options(),
            cfg.k,
            cfg.answer_template(),
            cfg.generator.model_id,
            cfg.jobs,
        )
    except EvalIncomplete as exc:
        _err(str(exc))
        return 1
    sys.stdout.write(comparison.render_text())
    _write_out(args.out, comparison.dumps())
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--mode", help="pipeline mode: baseline, concat or llm")
    common.add_argument("--index", help="index file path")
    common.add_argument("--k", type=int, help="number of retrieved contexts")
    common.add_argument("--jobs", type=int, help="parallel workers")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tablerag", description="Table-aware retrieval-augmented QA over PDFs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="index PDF documents")
    p.add_argument("pdfs", nargs="+")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("tables", parents=[common], help="dump detected tables")
    p.add_argument("pdf")
    p.add_argument("--page", type=int, help="0-based page index")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("enrich", parents=[common], help="print enriched table rows as JSON lines")
    p.add_argument("pdf")
    p.add_argument("--llm", action="store_true", help="rewrite rows through the enrichment gateway")
    p.set_defaults(func=cmd_enrich)

    p = sub.add_parser("query", parents=[common], help="answer one question from the index")
    p.add_argument("question")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", parents=[common], help="evaluate a query set against the index")
    p.add_argument("queries")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", parents=[common], help="compare pipeline modes on a corpus")
    p.add_argument("queries")
    p.add_argument("corpus", help="directory of PDF files")
    p.add_argument("--modes", default="baseline,concat,llm")
    p.add_argument("--out", help="write the JSON comparison here")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ConfigError, PdfError, QuerySetError, IndexStoreError, GatewayError, ValueError) as exc:
        _err(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
