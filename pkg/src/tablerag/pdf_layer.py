"""Positioned text extraction from born-digital PDFs.

Pages come back as lists of :class:`TextSpan` in PDF user-space points
(origin bottom-left). Glyphs are read with pdfminer's aggregator without
layout analysis, then merged into spans here so the grouping rule stays
under our control.
"""

from __future__ import annotations

import hashlib
import io
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from pdfminer.converter import PDFPageAggregator
from pdfminer.layout import LTChar
from pdfminer.pdfdocument import PDFDocument, PDFEncryptionError
from pdfminer.pdfinterp import PDFPageInterpreter, PDFResourceManager
from pdfminer.pdfpage import PDFPage
from pdfminer.pdfparser import PDFParser
from pdfminer.psexceptions import PSException

log = logging.getLogger(__name__)

BBox = tuple[float, float, float, float]

# horizontal gap (in font sizes) below which adjacent glyphs join one span
SPAN_GAP_FACTOR = 0.3


class PdfError(Exception):
    """Base class for document loading failures."""

    def __init__(self, path: str | Path, cause: str):
        self.path = str(path)
        self.cause = cause
        super().__init__(f"{self.path}: {cause}")


class FileUnreadable(PdfError):
    pass


class EncryptedPdf(PdfError):
    pass


class MalformedPdf(PdfError):
    pass


class EmptyDocument(PdfError):
    pass


@dataclass(frozen=True)
class TextSpan:
    text: str
    page_index: int
    bbox: BBox
    font_size: float

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if not self.text or self.text != self.text.strip():
            raise ValueError(f"span text must be non-empty and trimmed: {self.text!r}")
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate span bbox {self.bbox}")
        if self.font_size <= 0:
            raise ValueError("font_size must be positive")

    @property
    def x_center(self) -> float:
        return (self.bbox[0] + self.bbox[2]) / 2

    @property
    def y_center(self) -> float:
        return (self.bbox[1] + self.bbox[3]) / 2


def reading_order_key(span: TextSpan) -> tuple[float, float]:
    return (-span.y_center, span.bbox[0])


@dataclass(frozen=True)
class PageContent:
    page_index: int
    width: float
    height: float
    spans: tuple[TextSpan, ...] = ()
    rotated_dropped: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("page dimensions must be positive")
        object.__setattr__(self, "spans", tuple(sorted(self.spans, key=reading_order_key)))
        for s in self.spans:
            if s.page_index != self.page_index:
                raise ValueError("span page_index does not match page")


@dataclass(frozen=True)
class SourceDocument:
    doc_id: str
    path: str
    pages: tuple[PageContent, ...] = field(default_factory=tuple)


def _clamp_bbox(bbox: BBox, width: float, height: float) -> BBox:
    x0, y0, x1, y1 = bbox
    return (
        min(max(x0, 0.0), width),
        min(max(y0, 0.0), height),
        min(max(x1, 0.0), width),
        min(max(y1, 0.0), height),
    )


def _is_horizontal(ch: LTChar) -> bool:
    a, b, c, d, _, _ = ch.matrix
    return ch.upright and abs(b) < 1e-6 and abs(c) < 1e-6 and a > 0 and d > 0


def merge_glyphs(glyphs: Iterable[LTChar]) -> list[list[LTChar]]:
    """Group glyphs, in content-stream order, into same-line contiguous runs."""
    runs: list[list[LTChar]] = []
    current: list[LTChar] = []
    for ch in glyphs:
        if current:
            prev = current[-1]
            size = max(prev.size, ch.size)
            gap = ch.x0 - prev.x1
            same_line = abs(ch.matrix[5] - prev.matrix[5]) <= 0.25 * size
            if same_line and -SPAN_GAP_FACTOR * size < gap < SPAN_GAP_FACTOR * size:
                current.append(ch)
                continue
            runs.append(current)
        current = [ch]
    if current:
        runs.append(current)
    return runs


def _run_to_span(run: Sequence[LTChar], page_index: int, width: float, height: float) -> TextSpan | None:
    text = "".join(ch.get_text() for ch in run).strip()
    inked = [ch for ch in run if ch.get_text().strip()]
    if not text or not inked:
        return None
    bbox = _clamp_bbox(
        (
            min(ch.x0 for ch in inked),
            min(ch.y0 for ch in inked),
            max(ch.x1 for ch in inked),
            max(ch.y1 for ch in inked),
        ),
        width,
        height,
    )
    if not (bbox[0] < bbox[2] and bbox[1] < bbox[3]):
        return None
    # collapse internal whitespace runs produced by explicit space glyphs
    return TextSpan(" ".join(text.split()), page_index, bbox, float(run[0].size))


def _page_from_layout(ltpage, page_index: int) -> PageContent:
    px0, py0, px1, py1 = ltpage.bbox
    width, height = px1 - px0, py1 - py0
    glyphs: list[LTChar] = []
    rotated = 0
    for obj in ltpage:
        if not isinstance(obj, LTChar):
            continue
        if not _is_horizontal(obj):
            rotated += 1
            continue
        if px0 or py0:
            obj.set_bbox((obj.x0 - px0, obj.y0 - py0, obj.x1 - px0, obj.y1 - py0))
        glyphs.append(obj)
    if rotated:
        log.warning("page %d: dropped %d non-horizontal glyphs", page_index, rotated)
    spans = []
    for run in merge_glyphs(glyphs):
        span = _run_to_span(run, page_index, width, height)
        if span is not None:
            spans.append(span)
    return PageContent(page_index, width, height, tuple(spans), rotated)


def open_document(path: str | Path) -> SourceDocument:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FileUnreadable(path, exc.strerror or str(exc)) from exc
    doc_id = hashlib.sha256(data).hexdigest()

    try:
        parser = PDFParser(io.BytesIO(data))
        document = PDFDocument(parser)
    except PDFEncryptionError as exc:
        raise EncryptedPdf(path, "document is encrypted") from exc
    except (PSException, ValueError, TypeError, KeyError) as exc:
        raise MalformedPdf(path, str(exc) or type(exc).__name__) from exc
    if document.encryption is not None:
        raise EncryptedPdf(path, "document is encrypted")

    rsrc = PDFResourceManager()
    device = PDFPageAggregator(rsrc, laparams=None)
    interpreter = PDFPageInterpreter(rsrc, device)
    pages = []
    try:
        for i, page in enumerate(PDFPage.create_pages(document)):
            interpreter.process_page(page)
            pages.append(_page_from_layout(device.get_result(), i))
    except (PSException, ValueError, TypeError, KeyError) as exc:
        raise MalformedPdf(path, str(exc) or type(exc).__name__) from exc
    if not pages:
        raise EmptyDocument(path, "document has zero pages")
    return SourceDocument(doc_id, str(path), tuple(pages))


def group_lines(spans: Sequence[TextSpan], tol: float) -> list[list[TextSpan]]:
    """Single-linkage grouping of spans on y-center, top line first."""
    ordered = sorted(spans, key=lambda s: -s.y_center)
    lines: list[list[TextSpan]] = []
    for s in ordered:
        if lines and lines[-1][-1].y_center - s.y_center <= tol:
            lines[-1].append(s)
        else:
            lines.append([s])
    return [sorted(line, key=lambda s: s.bbox[0]) for line in lines]


def page_text(page: PageContent, line_tol: float = 3.0) -> str:
    if line_tol <= 0:
        raise ValueError("line_tol must be positive")
    return "\n".join(" ".join(s.text for s in line) for line in group_lines(page.spans, line_tol))


def _center_inside(span: TextSpan, region: BBox) -> bool:
    x0, y0, x1, y1 = region
    return x0 <= span.x_center <= x1 and y0 <= span.y_center <= y1


def strip_regions(page: PageContent, regions: Sequence[BBox]) -> PageContent:
    if not regions:
        return page
    kept = tuple(s for s in page.spans if not any(_center_inside(s, r) for r in regions))
    return replace(page, spans=kept)
