"""Chunking, embedding and an exact cosine vector store persisted as JSON lines."""

from __future__ import annotations

import json
import math
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .enrich import TableRef

INDEX_VERSION = 1
DEFAULT_DIM = 256
HASHED_BOW = "hashed-bow-v1"

TOKEN_RE = re.compile(r"[^\W_]+")
PARAGRAPH_RE = re.compile(r"\n[ \t]*\n")

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1


class IndexStoreError(Exception):
    pass


class DimensionMismatch(IndexStoreError):
    pass


class InvalidEmbedding(IndexStoreError):
    pass


class VersionMismatch(IndexStoreError):
    pass


class CorruptRecord(IndexStoreError):
    def __init__(self, lineno: int, cause: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {cause}")


class RemoteEmbedderError(IndexStoreError):
    pass


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    page_index: int
    kind: str  # "text" | "table_row"
    text: str
    table_ref: TableRef | None = None

    def __post_init__(self):
        if self.kind not in ("text", "table_row"):
            raise ValueError(f"unknown chunk kind {self.kind!r}")
        if not self.text:
            raise ValueError("chunk text must be non-empty")
        if (self.kind == "table_row") != (self.table_ref is not None):
            raise ValueError("table_ref must be present exactly for table_row chunks")

    @staticmethod
    def make_id(doc_id: str, kind: str, ordinal: int) -> str:
        return f"{doc_id}:{kind}:{ordinal}"

    def to_json(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "page_index": self.page_index,
            "kind": self.kind,
            "text": self.text,
            "table_ref": self.table_ref.to_json() if self.table_ref else None,
        }

    @classmethod
    def from_json(cls, d: dict) -> Chunk:
        ref = d.get("table_ref")
        return cls(
            d["chunk_id"], d["doc_id"], d["page_index"], d["kind"], d["text"], TableRef.from_json(ref) if ref else None
        )


def chunk_text(text: str, max_chars: int = 1000, overlap: int = 150) -> list[str]:
    if not max_chars > overlap >= 0:
        raise ValueError("need max_chars > overlap >= 0")
    paragraphs = [p.strip() for p in PARAGRAPH_RE.split(text)]
    pieces: list[str] = []
    current = ""
    for para in filter(None, paragraphs):
        if len(para) > max_chars:
            if current:
                pieces.append(current)
                current = ""
            step = max_chars - overlap
            start = 0
            while True:
                pieces.append(para[start : start + max_chars])
                if start + max_chars >= len(para):
                    break
                start += step
            continue
        candidate = f"{current}\n\n{para}" if current else para
        if len(candidate) <= max_chars:
            current = candidate
        else:
            pieces.append(current)
            current = para
    if current:
        pieces.append(current)
    return pieces


def fnv1a_64(s: str) -> int:
    h = FNV_OFFSET
    for byte in s.encode("utf-8"):
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def tokenize(text: str) -> list[str]:
    return TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Embedding:
    values: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.values)

    def norm(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self.values))

    def is_valid(self) -> bool:
        return all(v == 0.0 for v in self.values) or abs(self.norm() - 1.0) <= 1e-9


def normalize(values: Sequence[float]) -> Embedding:
    n = math.sqrt(math.fsum(v * v for v in values))
    if n == 0.0:
        return Embedding(tuple(0.0 for _ in values))
    return Embedding(tuple(v / n for v in values))


class HashedBowEmbedder:
    """Hashed bag of words: FNV-1a 64 of each token modulo ``dim``, count weights."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.embedder_id = HASHED_BOW

    def slot(self, token: str) -> int:
        return fnv1a_64(token) % self.dim

    def embed(self, text: str) -> Embedding:
        counts = [0.0] * self.dim
        for tok in tokenize(text):
            counts[self.slot(tok)] += 1.0
        return normalize(counts)


class RemoteEmbedder:
    """Embeddings endpoint following the ``POST {model, input}`` -> ``data[0].embedding`` convention."""

    def __init__(
        self,
        name: str,
        endpoint: str,
        dim: int,
        model: str | None = None,
        token_env: str = "",
        timeout: float = 30.0,
        transport: Callable[[str, Mapping[str, str], dict, float], tuple[int, str]] | None = None,
    ):
        self.name = name
        self.endpoint = endpoint
        self.dim = dim
        self.model = model or name
        self.token_env = token_env
        self.timeout = timeout
        self.transport = transport
        self.embedder_id = f"remote:{name}"

    def embed(self, text: str) -> Embedding:
        from .llm_gateway import TransportTimeout, httpx_transport

        headers = {"Content-Type": "application/json"}
        if self.token_env:
            token = os.environ.get(self.token_env, "")
            if not token:
                raise RemoteEmbedderError(f"environment variable {self.token_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        transport = self.transport or httpx_transport
        try:
            status, body = transport(self.endpoint, headers, {"model": self.model, "input": text}, self.timeout)
        except TransportTimeout as exc:
            raise RemoteEmbedderError(f"{self.embedder_id}: timeout: {exc}") from exc
        if status != 200:
            raise RemoteEmbedderError(f"{self.embedder_id}: HTTP {status}")
        try:
            values = [float(v) for v in json.loads(body)["data"][0]["embedding"]]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise RemoteEmbedderError(f"{self.embedder_id}: malformed body: {exc}") from exc
        if len(values) != self.dim:
            raise RemoteEmbedderError(f"{self.embedder_id}: expected dim {self.dim}, got {len(values)}")
        return normalize(values)


def embed(embedder, text: str) -> Embedding:
    return embedder.embed(text)


def make_embedder(spec: str, dim: int = DEFAULT_DIM, remotes: Mapping[str, dict] | None = None):
    if spec == HASHED_BOW:
        return HashedBowEmbedder(dim)
    if spec.startswith("remote:"):
        name = spec.split(":", 1)[1]
        conf = dict((remotes or {}).get(name) or {})
        if "endpoint" not in conf:
            raise ValueError(f"remote embedder {name!r} needs an endpoint in [embedders.{name}]")
        return RemoteEmbedder(name, conf.pop("endpoint"), int(conf.pop("dim", dim)), **conf)
    raise ValueError(f"unknown embedder {spec!r}")


def _fmt(v: float) -> str:
    return format(v, ".17g")


class VectorIndex:
    """Exact-scan cosine store keyed by chunk id."""

    def __init__(self, dim: int = DEFAULT_DIM, embedder_id: str = HASHED_BOW):
        self.dim = dim
        self.embedder_id = embedder_id
        self._chunks: dict[str, Chunk] = {}
        self._vectors: dict[str, np.ndarray] = {}
        self._lock = threading.RLock()
        self._matrix: tuple[list[str], np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self._chunks)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._chunks

    def get(self, chunk_id: str) -> Chunk:
        return self._chunks[chunk_id]

    def embedding(self, chunk_id: str) -> Embedding:
        return Embedding(tuple(float(v) for v in self._vectors[chunk_id]))

    def chunks(self) -> list[Chunk]:
        return [self._chunks[k] for k in sorted(self._chunks)]

    def upsert(self, chunk: Chunk, embedding: Embedding) -> None:
        if embedding.dim != self.dim:
            raise DimensionMismatch(f"embedding dim {embedding.dim} != index dim {self.dim}")
        if not embedding.is_valid():
            raise InvalidEmbedding(f"{chunk.chunk_id}: embedding is neither unit-norm nor zero")
        with self._lock:
            self._chunks[chunk.chunk_id] = chunk
            self._vectors[chunk.chunk_id] = np.asarray(embedding.values, dtype=np.float64)
            self._matrix = None

    def remove_doc(self, doc_id: str) -> int:
        with self._lock:
            stale = [cid for cid, c in self._chunks.items() if c.doc_id == doc_id]
            for cid in stale:
                del self._chunks[cid]
                del self._vectors[cid]
            if stale:
                self._matrix = None
            return len(stale)

    def _snapshot(self) -> tuple[list[str], np.ndarray]:
        with self._lock:
            if self._matrix is None:
                ids = sorted(self._vectors)
                mat = np.stack([self._vectors[i] for i in ids]) if ids else np.zeros((0, self.dim))
                self._matrix = (ids, mat)
            return self._matrix

    def search(self, query: Embedding, k: int) -> list[tuple[str, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        if query.dim != self.dim:
            raise DimensionMismatch(f"query dim {query.dim} != index dim {self.dim}")
        ids, mat = self._snapshot()
        if not ids:
            return []
        # elementwise product then row reduction: identical rows get identical scores
        scores = (mat * np.asarray(query.values, dtype=np.float64)).sum(axis=1)
        ranked = sorted(zip(ids, scores.tolist()), key=lambda t: (-t[1], t[0]))
        return ranked[:k]

    def persist(self, path: str | Path) -> None:
        with self._lock:
            lines = [json.dumps({"version": INDEX_VERSION, "dim": self.dim, "embedder_id": self.embedder_id})]
            for cid in sorted(self._chunks):
                vec = ",".join(_fmt(v) for v in self._vectors[cid].tolist())
                chunk = json.dumps(self._chunks[cid].to_json(), ensure_ascii=False)
                lines.append(f'{{"chunk": {chunk}, "embedding": [{vec}]}}')
            tmp = Path(str(path) + ".tmp")
            tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
            os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> VectorIndex:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
        lines = raw.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines:
            raise CorruptRecord(1, "missing header")
        try:
            header = json.loads(lines[0])
            version = header["version"]
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptRecord(1, f"bad header: {exc}") from exc
        if version != INDEX_VERSION:
            raise VersionMismatch(f"index version {version} is not supported (expected {INDEX_VERSION})")
        try:
            index = cls(int(header["dim"]), str(header["embedder_id"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise CorruptRecord(1, f"bad header: {exc}") from exc
        for lineno, line in enumerate(lines[1:], 2):
            try:
                rec = json.loads(line)
                chunk = Chunk.from_json(rec["chunk"])
                emb = Embedding(tuple(float(v) for v in rec["embedding"]))
                if chunk.chunk_id in index:
                    raise ValueError(f"duplicate chunk id {chunk.chunk_id}")
                index.upsert(chunk, emb)
            except (ValueError, KeyError, TypeError, IndexStoreError) as exc:
                raise CorruptRecord(lineno, str(exc)) from exc
        return index


def persist(index: VectorIndex, path: str | Path) -> None:
    index.persist(path)


def load(path: str | Path) -> VectorIndex:
    return VectorIndex.load(path)


def upsert(index: VectorIndex, chunk: Chunk, embedding: Embedding) -> None:
    index.upsert(chunk, embedding)


def search(index: VectorIndex, query: Embedding, k: int) -> list[tuple[str, float]]:
    return index.search(query, k)


def upsert_chunks(index: VectorIndex, embedder, chunks: Iterable[Chunk]) -> int:
    n = 0
    for chunk in chunks:
        index.upsert(chunk, embedder.embed(chunk.text))
        n += 1
    return n
