from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, strategies as st

from tablerag.enrich import TableRef
from tablerag.index import (
    Chunk,
    CorruptRecord,
    DimensionMismatch,
    Embedding,
    HashedBowEmbedder,
    InvalidEmbedding,
    VectorIndex,
    VersionMismatch,
    chunk_text,
    embed,
    fnv1a_64,
    normalize,
)

from oracles import brute_force_top_k, random_unit


def text_chunk(i, text="t", doc="d"):
    return Chunk(Chunk.make_id(doc, "text", i), doc, 0, "text", text)


def build(vectors, dim):
    index = VectorIndex(dim, "test")
    for cid, vec in vectors.items():
        index.upsert(Chunk(cid, "d", 0, "text", cid), Embedding(tuple(vec)))
    return index


def test_chunk_text_examples():
    assert chunk_text("") == []
    para = "x" * 500
    assert chunk_text(para, 1000) == [para]
    long = "".join(chr(97 + i % 26) for i in range(2500))
    pieces = chunk_text(long, 1000, 150)
    assert len(pieces) == 3
    assert pieces[1].startswith(pieces[0][-150:])
    assert "".join(p if i == 0 else p[150:] for i, p in enumerate(pieces)) == long


@given(st.lists(st.text(alphabet="ab \n", min_size=1, max_size=300), max_size=8), st.integers(50, 400))
def test_chunks_bounded(paras, max_chars):
    for piece in chunk_text("\n\n".join(paras), max_chars, max_chars // 4):
        assert 0 < len(piece) <= max_chars


def test_fnv_reference_vector():
    assert fnv1a_64("") == 0xCBF29CE484222325
    assert fnv1a_64("a") == 0xAF63DC4C8601EC8C


def test_embed_examples():
    e = HashedBowEmbedder(256)
    assert e.embedder_id == "hashed-bow-v1"
    assert embed(e, "").values == (0.0,) * 256
    assert embed(e, "a a") == embed(e, "a")
    ab = embed(e, "alpha beta")
    nz = [i for i, v in enumerate(ab.values) if v]
    assert nz == [43, 167]
    assert ab.values[43] == pytest.approx(1 / math.sqrt(2), abs=1e-12)


@given(st.text(max_size=200))
def test_embedding_norm_invariant(text):
    v = HashedBowEmbedder(64).embed(text)
    assert v.is_valid()
    assert v.norm() == pytest.approx(1.0, abs=1e-9) or v.norm() == 0.0


def test_upsert_then_self_search():
    e = HashedBowEmbedder()
    index = VectorIndex()
    c = text_chunk(0, "Gold plan deductible")
    index.upsert(c, e.embed(c.text))
    index.upsert(text_chunk(1, "unrelated words"), e.embed("unrelated words"))
    (top, score), *_ = index.search(e.embed(c.text), 2)
    assert top == c.chunk_id and score == pytest.approx(1.0, abs=1e-9)


def test_upsert_replaces():
    index = VectorIndex(4, "test")
    index.upsert(text_chunk(0, "old"), normalize([1, 0, 0, 0]))
    index.upsert(text_chunk(0, "new"), normalize([0, 1, 0, 0]))
    assert len(index) == 1 and index.get("d:text:0").text == "new"


def test_upsert_rejects_bad_embeddings():
    index = VectorIndex(4, "test")
    with pytest.raises(DimensionMismatch):
        index.upsert(text_chunk(0), normalize([1, 0, 0]))
    with pytest.raises(InvalidEmbedding):
        index.upsert(text_chunk(0), Embedding((2.0, 0.0, 0.0, 0.0)))


def test_search_small_cases():
    index = VectorIndex(4, "test")
    assert index.search(normalize([1, 0, 0, 0]), 3) == []
    for i, v in enumerate([[1, 0, 0, 0], [1, 1, 0, 0], [0, 0, 1, 0]]):
        index.upsert(text_chunk(i), normalize(v))
    hits = index.search(normalize([1, 0, 0, 0]), 10)
    assert [c for c, _ in hits] == ["d:text:0", "d:text:1", "d:text:2"]
    assert [s for _, s in hits] == sorted((s for _, s in hits), reverse=True)


def test_chunk_validation():
    with pytest.raises(ValueError):
        Chunk("x", "d", 0, "table_row", "t")
    with pytest.raises(ValueError):
        Chunk("x", "d", 0, "text", "t", TableRef("d", 0, 0, 0))
    c = Chunk("x", "d", 1, "table_row", "t", TableRef("d", 1, 0, 2))
    assert Chunk.from_json(c.to_json()) == c


@pytest.mark.parametrize("seed", range(5))
def test_search_matches_brute_force(seed):
    rng = random.Random(seed)
    dim = 32
    vectors = {f"c{i:04d}": random_unit(rng, dim) for i in range(1000)}
    # exact duplicates force score ties that only the id tie-break can order
    for j in range(20):
        vectors[f"dup{j:02d}"] = list(vectors[f"c{rng.randrange(1000):04d}"])
    index = build(vectors, dim)
    for q in range(50):
        query = random_unit(rng, dim) if q % 5 else list(vectors[f"c{rng.randrange(1000):04d}"])
        got = index.search(Embedding(tuple(query)), 10)
        want = brute_force_top_k(vectors, query, 10)
        assert [c for c, _ in got] == [c for c, _ in want]
        for (_, s1), (_, s2) in zip(got, want):
            assert s1 == pytest.approx(s2, abs=1e-12)


def test_ties_broken_by_id():
    index = VectorIndex(2, "test")
    for cid in ("b", "a", "c"):
        index.upsert(Chunk(cid, "d", 0, "text", cid), normalize([1, 1]))
    assert [c for c, _ in index.search(normalize([1, 0]), 3)] == ["a", "b", "c"]


def test_persist_load_roundtrip(tmp_path):
    rng = random.Random(3)
    vectors = {f"c{i:03d}": random_unit(rng, 16) for i in range(300)}
    index = build(vectors, 16)
    path = tmp_path / "idx.jsonl"
    index.persist(path)
    loaded = VectorIndex.load(path)
    assert (loaded.dim, loaded.embedder_id, len(loaded)) == (16, "test", 300)
    for _ in range(100):
        q = Embedding(tuple(random_unit(rng, 16)))
        assert loaded.search(q, 7) == index.search(q, 7)
    again = tmp_path / "again.jsonl"
    loaded.persist(again)
    assert again.read_bytes() == path.read_bytes()


def test_load_errors(tmp_path):
    index = build({"a": [1.0, 0.0], "b": [0.0, 1.0]}, 2)
    path = tmp_path / "idx.jsonl"
    index.persist(path)
    lines = path.read_text().splitlines()

    v2 = tmp_path / "v2.jsonl"
    v2.write_text("\n".join([lines[0].replace('"version": 1', '"version": 2')] + lines[1:]) + "\n")
    with pytest.raises(VersionMismatch):
        VectorIndex.load(v2)

    cut = tmp_path / "cut.jsonl"
    cut.write_text("\n".join(lines[:-1] + [lines[-1][: len(lines[-1]) // 2]]))
    with pytest.raises(CorruptRecord) as info:
        VectorIndex.load(cut)
    assert info.value.lineno == len(lines)
    assert f"line {len(lines)}" in str(info.value)
