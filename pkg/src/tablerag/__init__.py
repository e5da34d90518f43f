"""Retrieval-augmented QA over PDFs with tables extracted and enriched into row chunks."""

from .evaluation import EvalReport, QueryCase, Score, accuracy_pct, judge
from .index import Chunk, HashedBowEmbedder, VectorIndex
from .pdf_layer import PageContent, SourceDocument, TextSpan, open_document
from .rag import PipelineMode, answer, ingest
from .table_detect import DetectParams, TableGrid, detect_tables

__version__ = "0.1.0"
