"""Ingestion under the three pipeline modes and retrieval-augmented answering."""

from __future__ import annotations

import enum
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .enrich import EnrichedRow, PromptTemplate, concat_enrich_table, llm_enrich_table
from .index import Chunk, VectorIndex, chunk_text
from .llm_gateway import ChatMessage, ChatRequest, Gateway
from .pdf_layer import SourceDocument, page_text, strip_regions
from .table_detect import DetectParams, TableGrid, detect_tables

log = logging.getLogger(__name__)


class PipelineMode(str, enum.Enum):
    BASELINE = "baseline"
    CONCAT = "concat"
    LLM = "llm"

    @property
    def label(self) -> str:
        return {"baseline": "BaselineText", "concat": "TableConcat", "llm": "TableLlm"}[self.value]

    @property
    def description(self) -> str:
        return {
            "baseline": "Page text only",
            "concat": "Tables extracted + header:value rows",
            "llm": "Tables extracted + LLM-rewritten rows",
        }[self.value]

    @classmethod
    def parse(cls, name: str) -> PipelineMode:
        key = name.strip().lower()
        for m in cls:
            if key in (m.value, m.label.lower()):
                return m
        raise ValueError(f"unknown pipeline mode {name!r}; choose from baseline, concat, llm")


@dataclass(frozen=True)
class IngestOptions:
    max_chars: int = 1000
    overlap: int = 150
    line_tol: float = 3.0
    detect: DetectParams = field(default_factory=DetectParams)
    duplicate_table_text: bool = False
    enrich_template: PromptTemplate | None = None
    enrich_model: str = "gpt-3.5-turbo"
    enrich_max_tokens: int = 1024
    enrich_jobs: int = 1


@dataclass(frozen=True)
class IngestStats:
    doc_id: str
    pages: int = 0
    text_chunks: int = 0
    tables: int = 0
    enriched_rows: int = 0
    llm_fallbacks: int = 0

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "pages": self.pages,
            "text_chunks": self.text_chunks,
            "tables": self.tables,
            "enriched_rows": self.enriched_rows,
            "llm_fallbacks": self.llm_fallbacks,
        }


def document_tables(doc: SourceDocument, params: DetectParams) -> list[TableGrid]:
    return [t for page in doc.pages for t in detect_tables(page, params, doc.doc_id)]


def _enrich(
    tables: list[TableGrid], mode: PipelineMode, gateway: Gateway | None, options: IngestOptions
) -> tuple[list[EnrichedRow], int]:
    if mode is PipelineMode.CONCAT:
        return [row for t in tables for row in concat_enrich_table(t)], 0
    template = options.enrich_template or PromptTemplate.load()

    def one(t: TableGrid):
        return llm_enrich_table(t, gateway, template, options.enrich_model, options.enrich_max_tokens)

    if options.enrich_jobs > 1 and len(tables) > 1:
        with ThreadPoolExecutor(options.enrich_jobs) as pool:
            outcomes = list(pool.map(one, tables))
    else:
        outcomes = [one(t) for t in tables]
    rows = [r for o in outcomes for r in o.rows]
    return rows, sum(o.fallback for o in outcomes)


def build_chunks(
    doc: SourceDocument,
    mode: PipelineMode,
    enrichment_gateway: Gateway | None = None,
    options: IngestOptions | None = None,
) -> tuple[list[Chunk], IngestStats]:
    options = options or IngestOptions()
    if mode is PipelineMode.LLM and enrichment_gateway is None:
        raise ValueError("llm mode needs an enrichment gateway")
    chunks: list[Chunk] = []
    tables: list[TableGrid] = []
    text_ordinal = 0
    for page in doc.pages:
        page_tables: list[TableGrid] = []
        if mode is not PipelineMode.BASELINE:
            page_tables = detect_tables(page, options.detect, doc.doc_id)
            tables.extend(page_tables)
            if not options.duplicate_table_text:
                page = strip_regions(page, [t.bbox for t in page_tables])
        for piece in chunk_text(page_text(page, options.line_tol), options.max_chars, options.overlap):
            chunks.append(Chunk(Chunk.make_id(doc.doc_id, "text", text_ordinal), doc.doc_id, page.page_index, "text", piece))
            text_ordinal += 1
    rows: list[EnrichedRow] = []
    fallbacks = 0
    if tables:
        rows, fallbacks = _enrich(tables, mode, enrichment_gateway, options)
    for ordinal, row in enumerate(rows):
        chunks.append(
            Chunk(
                Chunk.make_id(doc.doc_id, "table_row", ordinal),
                doc.doc_id,
                row.table_ref.page_index,
                "table_row",
                row.text,
                row.table_ref,
            )
        )
    stats = IngestStats(doc.doc_id, len(doc.pages), text_ordinal, len(tables), len(rows), fallbacks)
    return chunks, stats


def ingest(
    doc: SourceDocument,
    mode: PipelineMode,
    index: VectorIndex,
    embedder,
    enrichment_gateway: Gateway | None = None,
    options: IngestOptions | None = None,
) -> IngestStats:
    """Index one document. Earlier chunks of the same document are replaced."""
    if embedder.embedder_id != index.embedder_id or embedder.dim != index.dim:
        raise ValueError(f"embedder {embedder.embedder_id}/{embedder.dim} does not match index {index.embedder_id}/{index.dim}")
    chunks, stats = build_chunks(doc, mode, enrichment_gateway, options)
    index.remove_doc(doc.doc_id)
    for chunk in chunks:
        index.upsert(chunk, embedder.embed(chunk.text))
    return stats


@dataclass(frozen=True)
class AnswerTemplate:
    system_instruction: str
    user_template: str

    @classmethod
    def parse(cls, text: str) -> AnswerTemplate:
        head, sep, tail = text.partition("\n---\n")
        if not sep:
            raise ValueError("answer template needs two sections separated by a '---' line")
        system, user = head.strip("\n"), tail.strip("\n")
        if not system or "{question}" not in user or "{contexts}" not in user:
            raise ValueError("answer template needs a system section and {contexts}/{question} placeholders")
        return cls(system, user)

    @classmethod
    def load(cls, path: str | Path | None = None) -> AnswerTemplate:
        if path is None:
            text = resources.files("tablerag").joinpath("data/answer_prompt.txt").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.parse(text)


NO_CONTEXT = "(no context retrieved)"
PLACEHOLDER_RE = re.compile(r"\{(contexts|question)\}")


def provenance(chunk: Chunk) -> str:
    where = f"page {chunk.page_index}"
    if chunk.table_ref is not None:
        where += f", table {chunk.table_ref.table_index}, row {chunk.table_ref.row_index}"
    return f"{chunk.chunk_id} ({where})"


def render_contexts(chunks: list[Chunk]) -> str:
    if not chunks:
        return NO_CONTEXT
    return "\n\n".join(f"[{i}] {provenance(c)}\n{c.text}" for i, c in enumerate(chunks, 1))


@dataclass(frozen=True)
class Answer:
    text: str
    supporting: tuple[tuple[str, float], ...]
    mode: PipelineMode | None = None


def answer(
    question: str,
    index: VectorIndex,
    embedder,
    generator: Gateway,
    k: int = 5,
    template: AnswerTemplate | None = None,
    model_id: str = "llama-2-chat",
    max_tokens: int = 512,
    mode: PipelineMode | None = None,
) -> Answer:
    if k < 1:
        raise ValueError("k must be >= 1")
    template = template or AnswerTemplate.load()
    hits = index.search(embedder.embed(question), k)
    if not hits:
        log.info("index is empty; generating without context")
    fills = {"contexts": render_contexts([index.get(cid) for cid, _ in hits]), "question": question}
    user = PLACEHOLDER_RE.sub(lambda m: fills[m.group(1)], template.user_template)
    request = ChatRequest(
        model_id, (ChatMessage("system", template.system_instruction), ChatMessage("user", user)), 0.0, max_tokens
    )
    response = generator.complete(request)
    return Answer(response.content, tuple(hits), mode)
