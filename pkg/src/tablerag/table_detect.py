"""Stream-mode table detection from positioned spans.

Rows come from single-linkage clustering of span y-centers, columns from
single-linkage clustering of span left edges. No ruling lines are used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .pdf_layer import BBox, PageContent, TextSpan

Interval = tuple[float, float]


@dataclass(frozen=True)
class DetectParams:
    row_tol: float = 2.0
    col_tol: float = 6.0
    min_support: int = 2
    min_table_rows: int = 3
    header_rows: int = 1

    def __post_init__(self):
        if self.row_tol <= 0 or self.col_tol <= 0:
            raise ValueError("row_tol and col_tol must be positive")
        if self.min_support < 2:
            raise ValueError("min_support must be >= 2")
        if self.min_table_rows < 3:
            raise ValueError("min_table_rows must be >= 3")
        if self.header_rows < 1:
            raise ValueError("header_rows must be >= 1")


@dataclass(frozen=True)
class RowBand:
    y_center: float
    spans: tuple[TextSpan, ...]


@dataclass(frozen=True)
class Cell:
    row_index: int
    col_index: int
    text: str = ""
    bbox: BBox | None = None


@dataclass(frozen=True)
class TableGrid:
    doc_id: str
    page_index: int
    table_index: int
    n_rows: int
    n_cols: int
    cells: tuple[tuple[Cell, ...], ...]
    header_rows: int
    bbox: BBox
    mode: str = field(default="stream")

    def __post_init__(self):
        if self.n_rows < 2 or self.n_cols < 2:
            raise ValueError("a table needs at least 2 rows and 2 columns")
        if not 1 <= self.header_rows < self.n_rows:
            raise ValueError("header_rows must leave at least one data row")
        if len(self.cells) != self.n_rows or any(len(r) != self.n_cols for r in self.cells):
            raise ValueError("cells must form a dense n_rows x n_cols grid")
        for r, row in enumerate(self.cells):
            for c, cell in enumerate(row):
                if (cell.row_index, cell.col_index) != (r, c):
                    raise ValueError(f"cell at ({r},{c}) carries indices ({cell.row_index},{cell.col_index})")

    def texts(self) -> list[list[str]]:
        return [[cell.text for cell in row] for row in self.cells]

    @property
    def n_data_rows(self) -> int:
        return self.n_rows - self.header_rows

    def data_rows(self) -> list[list[str]]:
        return self.texts()[self.header_rows:]

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "page_index": self.page_index,
            "table_index": self.table_index,
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "header_rows": self.header_rows,
            "cells": self.texts(),
        }


def _union(boxes: Sequence[BBox]) -> BBox:
    return (
        min(b[0] for b in boxes),
        min(b[1] for b in boxes),
        max(b[2] for b in boxes),
        max(b[3] for b in boxes),
    )


def cluster_rows(spans: Sequence[TextSpan], row_tol: float = 2.0) -> list[RowBand]:
    if row_tol <= 0:
        raise ValueError("row_tol must be positive")
    ordered = sorted(spans, key=lambda s: (-s.y_center, s.bbox[0]))
    groups: list[list[TextSpan]] = []
    for s in ordered:
        if groups and groups[-1][-1].y_center - s.y_center <= row_tol:
            groups[-1].append(s)
        else:
            groups.append([s])
    bands = []
    for g in groups:
        y = sum(s.y_center for s in g) / len(g)
        bands.append(RowBand(y, tuple(sorted(g, key=lambda s: (s.bbox[0], -s.y_center)))))
    return bands


def detect_columns(bands: Sequence[RowBand], col_tol: float = 6.0, min_support: int = 2) -> list[Interval]:
    """Column intervals from left-edge alignment; ``[]`` when fewer than two survive."""
    if col_tol <= 0:
        raise ValueError("col_tol must be positive")
    if min_support < 2:
        raise ValueError("min_support must be >= 2")
    edges = sorted((s.bbox[0], i) for i, band in enumerate(bands) for s in band.spans)
    clusters: list[list[tuple[float, int]]] = []
    for x0, i in edges:
        if clusters and x0 - clusters[-1][-1][0] <= col_tol:
            clusters[-1].append((x0, i))
        else:
            clusters.append([(x0, i)])
    starts = [c[0][0] for c in clusters if len({i for _, i in c}) >= min_support]
    if len(starts) < 2:
        return []
    right = max(s.bbox[2] for band in bands for s in band.spans)
    ends = starts[1:] + [max(right, starts[-1])]
    return list(zip(starts, ends))


def assign_column(x: float, columns: Sequence[Interval]) -> int | None:
    """Index of the interval holding ``x``; a point on a boundary goes left."""
    if not columns or x < columns[0][0] or x > columns[-1][1]:
        return None
    j = 0
    for k, (start, _) in enumerate(columns):
        if start < x:
            j = k
        else:
            break
    return j


def _band_columns(band: RowBand, columns: Sequence[Interval]) -> list[int | None]:
    return [assign_column(s.x_center, columns) for s in band.spans]


def _qualifies(band: RowBand, columns: Sequence[Interval]) -> bool:
    hits = {c for c in _band_columns(band, columns) if c is not None}
    return len(band.spans) >= 2 and len(hits) >= 2


def _runs(flags: Sequence[bool]) -> list[tuple[int, int]]:
    """Maximal [start, stop) runs of True."""
    out, start = [], None
    for i, f in enumerate(list(flags) + [False]):
        if f and start is None:
            start = i
        elif not f and start is not None:
            out.append((start, i))
            start = None
    return out


def _assemble(
    bands: Sequence[RowBand], columns: Sequence[Interval], doc_id: str, page_index: int, table_index: int, header_rows: int
) -> TableGrid:
    per_row: list[dict[int, list[TextSpan]]] = []
    for band in bands:
        slots: dict[int, list[TextSpan]] = {}
        for s, c in zip(band.spans, _band_columns(band, columns)):
            if c is not None:
                slots.setdefault(c, []).append(s)
        per_row.append(slots)
    used = sorted({c for slots in per_row for c in slots})
    cells, members = [], []
    for r, slots in enumerate(per_row):
        row = []
        for new_c, c in enumerate(used):
            spans = sorted(slots.get(c, []), key=lambda s: s.bbox[0])
            members.extend(spans)
            row.append(
                Cell(r, new_c, " ".join(s.text for s in spans), _union([s.bbox for s in spans]) if spans else None)
            )
        cells.append(tuple(row))
    n_rows = len(bands)
    return TableGrid(
        doc_id=doc_id,
        page_index=page_index,
        table_index=table_index,
        n_rows=n_rows,
        n_cols=len(used),
        cells=tuple(cells),
        header_rows=min(header_rows, n_rows - 1),
        bbox=_union([s.bbox for s in members]),
    )


def detect_tables(page: PageContent, params: DetectParams | None = None, doc_id: str = "") -> list[TableGrid]:
    """Find stream-mode tables on a page, top to bottom.

    Candidate runs are maximal stretches of bands with two or more spans.
    Columns are computed once per candidate run; the longest stretch of
    bands that hit at least two columns becomes the table (topmost wins a
    tie). Keeping one table per candidate run makes the detected count
    non-increasing in both ``min_support`` and ``min_table_rows``.
    """
    params = params or DetectParams()
    bands = cluster_rows(page.spans, params.row_tol)
    tables: list[TableGrid] = []
    for start, stop in _runs([len(b.spans) >= 2 for b in bands]):
        run = bands[start:stop]
        if len(run) < params.min_table_rows:
            continue
        columns = detect_columns(run, params.col_tol, params.min_support)
        if not columns:
            continue
        best = None
        for s, e in _runs([_qualifies(b, columns) for b in run]):
            if e - s >= params.min_table_rows and (best is None or e - s > best[1] - best[0]):
                best = (s, e)
        if best is None:
            continue
        tables.append(
            _assemble(run[best[0] : best[1]], columns, doc_id, page.page_index, len(tables), params.header_rows)
        )
    return tables


def extract_header(grid: TableGrid, header_rows: int | None = None) -> list[str]:
    h = grid.header_rows if header_rows is None else header_rows
    if not 1 <= h < grid.n_rows:
        raise ValueError("header_rows out of range for grid")
    texts = grid.texts()
    headers = []
    for j in range(grid.n_cols):
        parts = [texts[r][j] for r in range(h) if texts[r][j]]
        headers.append(" ".join(parts) or f"col{j}")
    return headers
