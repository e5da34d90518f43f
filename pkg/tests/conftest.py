from __future__ import annotations

from pathlib import Path

import pytest
from reportlab.pdfgen import canvas

from tablerag.pdf_layer import PageContent, TextSpan
from tablerag.synth import PageSpec, TableSpec, write_pdf

SUITE_DIR = Path(__file__).resolve().parents[1] / "src" / "tablerag" / "data" / "suite"

TABLE_GRID = [
    ["Plan", "Deductible", "Copay"],
    ["Bronze", "$2,000", "$40"],
    ["Silver", "$1,000", "$25"],
    ["Gold", "$500", "$10"],
]


def span(text, x0, y0, size=10.0, page=0, width=None):
    w = width if width is not None else 0.5 * size * len(text)
    return TextSpan(text, page, (x0, y0, x0 + w, y0 + size), size)


def page_of(*spans, width=612.0, height=792.0, index=0):
    return PageContent(index, width, height, tuple(spans))


@pytest.fixture
def hello_pdf(tmp_path):
    path = tmp_path / "hello.pdf"
    c = canvas.Canvas(str(path), invariant=1)
    c.setFont("Helvetica", 12)
    c.drawString(72, 700, "Hello")
    c.showPage()
    c.save()
    return path


@pytest.fixture
def empty_pdf(tmp_path):
    path = tmp_path / "empty.pdf"
    c = canvas.Canvas(str(path), invariant=1)
    c.showPage()
    c.save()
    return path


@pytest.fixture
def prose_pdf(tmp_path):
    lines = ["Our policy covers staff travel booked through the portal.", "Receipts are due within thirty days."]
    return write_pdf(tmp_path / "prose.pdf", [PageSpec(lines, None, [], title="Travel Policy")])


@pytest.fixture
def table_pdf(tmp_path):
    """One page: title, a stray caption, a 4x3 table, a closing line."""
    table = TableSpec("Summary of coverage", TABLE_GRID[0], TABLE_GRID[1:])
    page = PageSpec(["Coverage applies from the plan start date."], table, ["Rates are per member."], title="Benefits Guide")
    return write_pdf(tmp_path / "table.pdf", [page])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
