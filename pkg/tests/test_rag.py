from __future__ import annotations

import pytest

from tablerag.index import Chunk, HashedBowEmbedder, VectorIndex
from tablerag.llm_gateway import MockGateway
from tablerag.mocks import sentences_rule
from tablerag.pdf_layer import open_document
from tablerag.rag import (
    NO_CONTEXT,
    AnswerTemplate,
    IngestOptions,
    PipelineMode,
    answer,
    build_chunks,
    ingest,
)

from conftest import TABLE_GRID

CELLS = [t for row in TABLE_GRID for t in row]


def fresh():
    e = HashedBowEmbedder()
    return VectorIndex(e.dim, e.embedder_id), e


def text_of(chunks, kind="text"):
    return "\n".join(c.text for c in chunks if c.kind == kind)


def test_prose_doc_same_in_every_mode(prose_pdf):
    doc = open_document(prose_pdf)
    results = [build_chunks(doc, m, MockGateway(default=sentences_rule)) for m in PipelineMode]
    for chunks, stats in results:
        assert (stats.tables, stats.enriched_rows) == (0, 0) and stats.text_chunks >= 1
    assert all(r == results[0] for r in results)


def test_table_doc_concat_counts(table_pdf):
    index, e = fresh()
    stats = ingest(open_document(table_pdf), PipelineMode.CONCAT, index, e)
    assert (stats.tables, stats.enriched_rows) == (1, 3)
    rows = [c for c in index.chunks() if c.kind == "table_row"]
    assert sorted(c.table_ref.row_index for c in rows) == [0, 1, 2]
    assert "Plan: Silver; Deductible: $1,000; Copay: $25" in {c.text for c in rows}


def test_table_text_replaced_not_duplicated(table_pdf):
    doc = open_document(table_pdf)
    base, _ = build_chunks(doc, PipelineMode.BASELINE)
    concat, _ = build_chunks(doc, PipelineMode.CONCAT)
    base_text, concat_text = text_of(base), text_of(concat)
    for cell in CELLS:
        assert cell in base_text
        assert cell not in concat_text
    assert "Rates are per member." in concat_text


def test_duplicate_table_text_flag(table_pdf):
    doc = open_document(table_pdf)
    chunks, _ = build_chunks(doc, PipelineMode.CONCAT, options=IngestOptions(duplicate_table_text=True))
    assert all(cell in text_of(chunks) for cell in CELLS)


def test_llm_mode_rows_and_need_gateway(table_pdf):
    doc = open_document(table_pdf)
    with pytest.raises(ValueError):
        build_chunks(doc, PipelineMode.LLM)
    chunks, stats = build_chunks(doc, PipelineMode.LLM, MockGateway(default=sentences_rule))
    assert stats.enriched_rows == 3 and stats.llm_fallbacks == 0
    assert "Gold (Plan) has Deductible $500 and Copay $10." in text_of(chunks, "table_row")


def test_reingest_replaces(table_pdf):
    index, e = fresh()
    doc = open_document(table_pdf)
    ingest(doc, PipelineMode.CONCAT, index, e)
    before = {c.chunk_id: c for c in index.chunks()}
    ingest(doc, PipelineMode.BASELINE, index, e)
    assert all(c.kind == "text" for c in index.chunks())
    ingest(doc, PipelineMode.CONCAT, index, e)
    assert {c.chunk_id: c for c in index.chunks()} == before


def echo_context(request):
    return request.last_user_message()


def test_answer_single_chunk():
    index, e = fresh()
    c = Chunk("d:table_row:0", "d", 0, "text", "Name: Alice; Age: 30")
    index.upsert(c, e.embed(c.text))
    ans = answer("How old is Alice?", index, e, MockGateway(default=echo_context))
    assert ans.supporting[0][0] == c.chunk_id
    assert "Name: Alice; Age: 30" in ans.text and "How old is Alice?" in ans.text


def test_answer_empty_index():
    index, e = fresh()
    ans = answer("Anything?", index, e, MockGateway(default=echo_context))
    assert ans.supporting == ()
    assert NO_CONTEXT in ans.text


def test_overlap_ranks_first():
    index, e = fresh()
    a = Chunk("d:text:0", "d", 0, "text", "The Gold plan copay is ten dollars")
    b = Chunk("d:text:1", "d", 0, "text", "Receipts are due within thirty days")
    for c in (a, b):
        index.upsert(c, e.embed(c.text))
    q = "What is the Gold plan copay?"
    qv = e.embed(q)
    sa = sum(x * y for x, y in zip(qv.values, e.embed(a.text).values))
    sb = sum(x * y for x, y in zip(qv.values, e.embed(b.text).values))
    assert sa > sb
    ans = answer(q, index, e, MockGateway(default=echo_context), k=2)
    assert [cid for cid, _ in ans.supporting] == [a.chunk_id, b.chunk_id]
    assert all(cid in index for cid, _ in ans.supporting)


def test_placeholders_substituted_once():
    index, e = fresh()
    c = Chunk("d:text:0", "d", 0, "text", "literal {question} inside a chunk")
    index.upsert(c, e.embed(c.text))
    ans = answer("Q?", index, e, MockGateway(default=echo_context))
    assert "literal {question} inside a chunk" in ans.text


def test_answer_template_parse():
    with pytest.raises(ValueError):
        AnswerTemplate.parse("no separator {contexts} {question}")
    with pytest.raises(ValueError):
        AnswerTemplate.parse("sys\n---\nonly {question}")
    t = AnswerTemplate.load()
    assert "{contexts}" in t.user_template and "{question}" in t.user_template


def test_mode_names():
    assert PipelineMode.parse("Concat") is PipelineMode.CONCAT
    assert [m.label for m in PipelineMode] == ["BaselineText", "TableConcat", "TableLlm"]
    with pytest.raises(ValueError):
        PipelineMode.parse("lattice")
