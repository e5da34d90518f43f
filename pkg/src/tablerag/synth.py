"""Synthetic fixtures: span layouts with known grids, small PDFs, and the bundled suite.

PDFs are written with reportlab in invariant mode so identical inputs give
identical bytes (and therefore identical doc ids).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .evaluation import QueryCase, normalize_answer
from .pdf_layer import TextSpan

PORTRAIT = (612.0, 792.0)
LANDSCAPE = (792.0, 612.0)
MARGIN = 72.0


# ---------------------------------------------------------------- span fixtures


@dataclass
class GridFixture:
    spans: list[TextSpan]
    grid: list[list[str]]
    header_rows: int
    page_width: float = PORTRAIT[0]
    page_height: float = PORTRAIT[1]


def approx_width(text: str, font_size: float) -> float:
    return max(0.5 * font_size * len(text), 1.0)


def grid_to_spans(
    grid: Sequence[Sequence[str]],
    col_x: Sequence[float],
    y_top: float,
    pitch: float,
    font_size: float = 9.0,
    page_index: int = 0,
    jitter: float = 0.0,
    rng: random.Random | None = None,
) -> list[TextSpan]:
    """One span per non-empty cell, left-aligned at ``col_x`` with optional jitter."""
    rng = rng or random.Random(0)
    spans = []
    for r, row in enumerate(grid):
        baseline = y_top - r * pitch
        for c, text in enumerate(row):
            if not text:
                continue
            dx = rng.uniform(-jitter, jitter) if jitter else 0.0
            dy = rng.uniform(-jitter, jitter) if jitter else 0.0
            x0 = col_x[c] + dx
            y0 = baseline + dy
            spans.append(TextSpan(text, page_index, (x0, y0, x0 + approx_width(text, font_size), y0 + font_size), font_size))
    return spans


WORDS = (
    "alpha bravo delta echo gamma kilo lima metro nova omega prime quota rho sigma tango ultra vega zulu "
    "basic plus gold silver bronze annual monthly rate cap limit fee band tier zone class level"
).split()


def _cell_text(rng: random.Random, col: int) -> str:
    if col == 0 or rng.random() < 0.4:
        return " ".join(rng.choice(WORDS).capitalize() for _ in range(rng.randint(1, 2)))
    return str(rng.randint(10, 99999))


def random_grid_fixture(
    seed: int,
    n_rows: int | None = None,
    n_cols: int | None = None,
    header_rows: int = 1,
    missing: float = 0.15,
    jitter: float = 0.9,
    font_size: float = 9.0,
) -> GridFixture:
    """A random table layout whose grid is known exactly.

    Every row keeps at least two filled cells and every column at least two
    filled rows, so the layout is detectable by construction. Jitter stays
    below half the default row and column tolerances.
    """
    rng = random.Random(seed)
    n_rows = n_rows or rng.randint(3, 8)
    n_cols = n_cols or rng.randint(2, 6)
    grid = [[_cell_text(rng, c) for c in range(n_cols)] for _ in range(n_rows)]
    for r in range(n_rows):
        for c in range(n_cols):
            if rng.random() < missing:
                grid[r][c] = ""
    for r in range(n_rows):
        while sum(1 for t in grid[r] if t) < 2:
            c = rng.randrange(n_cols)
            grid[r][c] = grid[r][c] or _cell_text(rng, c)
    for c in range(n_cols):
        while sum(1 for r in range(n_rows) if grid[r][c]) < 2:
            r = rng.randrange(n_rows)
            grid[r][c] = grid[r][c] or _cell_text(rng, c)
    widths = [max(approx_width(grid[r][c], font_size) for r in range(n_rows) if grid[r][c]) for c in range(n_cols)]
    col_x = [MARGIN]
    for w in widths[:-1]:
        col_x.append(col_x[-1] + w + 18.0)
    y_top = 640.0
    spans = grid_to_spans(grid, col_x, y_top, 15.0, font_size, 0, jitter, rng)
    # prose lines above and below: one span per band, never part of a table
    spans.append(TextSpan("Schedule of benefits and limits for the current year", 0, (MARGIN, 700, 330, 709), font_size))
    spans.append(TextSpan("Figures are subject to change.", 0, (MARGIN, y_top - n_rows * 15.0 - 30, 220, y_top - n_rows * 15.0 - 21), font_size))
    return GridFixture(spans, grid, header_rows)


# ---------------------------------------------------------------- PDF writing


@dataclass
class TableSpec:
    title: str
    header: list[str]
    rows: list[list[str]]
    font_size: float = 9.0

    @property
    def grid(self) -> list[list[str]]:
        return [self.header] + self.rows


@dataclass
class PageSpec:
    lines_before: list[str] = field(default_factory=list)
    table: TableSpec | None = None
    lines_after: list[str] = field(default_factory=list)
    size: tuple[float, float] = PORTRAIT
    title: str | None = None


def _layout_columns(grid: Sequence[Sequence[str]], font: str, size: float, page_w: float) -> tuple[list[float], float]:
    from reportlab.pdfbase.pdfmetrics import stringWidth

    while True:
        widths = [max(stringWidth(row[c], font, size) for row in grid) for c in range(len(grid[0]))]
        gap = max(12.0, 1.6 * size)
        xs = [MARGIN]
        for w in widths[:-1]:
            xs.append(xs[-1] + w + gap)
        if xs[-1] + widths[-1] <= page_w - MARGIN / 2 or size <= 6.0:
            return xs, size
        size -= 0.5


def write_pdf(path: str | Path, pages: Sequence[PageSpec]) -> Path:
    from reportlab.pdfgen import canvas

    path = Path(path)
    c = canvas.Canvas(str(path), pagesize=pages[0].size if pages else PORTRAIT, invariant=1, pageCompression=0)
    for spec in pages:
        c.setPageSize(spec.size)
        width, height = spec.size
        y = height - MARGIN
        if spec.title:
            c.setFont("Helvetica-Bold", 14)
            c.drawString(MARGIN, y, spec.title)
            y -= 28
        c.setFont("Helvetica", 10)
        for line in spec.lines_before:
            c.drawString(MARGIN, y, line)
            y -= 15
        if spec.table is not None:
            t = spec.table
            y -= 10
            c.setFont("Helvetica-Bold", 10)
            c.drawString(MARGIN, y, t.title)
            y -= 20
            xs, size = _layout_columns(t.grid, "Helvetica", t.font_size, width)
            c.setFont("Helvetica", size)
            for row in t.grid:
                for x, text in zip(xs, row):
                    if text:
                        c.drawString(x, y, text)
                y -= size * 1.7
            y -= 12
        c.setFont("Helvetica", 10)
        for line in spec.lines_after:
            c.drawString(MARGIN, y, line)
            y -= 15
        c.showPage()
    c.save()
    return path


def write_rotated_pdf(path: str | Path) -> Path:
    from reportlab.pdfgen import canvas

    c = canvas.Canvas(str(path), pagesize=PORTRAIT, invariant=1)
    c.setFont("Helvetica", 10)
    c.drawString(MARGIN, 700, "Upright line")
    c.saveState()
    c.translate(300, 300)
    c.rotate(90)
    c.drawString(0, 0, "Sideways")
    c.restoreState()
    c.showPage()
    c.save()
    return Path(path)


def write_encrypted_pdf(path: str | Path) -> Path:
    from reportlab.pdfgen import canvas

    c = canvas.Canvas(str(path), pagesize=PORTRAIT, invariant=1, encrypt="secret")
    c.drawString(MARGIN, 700, "Locked")
    c.showPage()
    c.save()
    return Path(path)


# ---------------------------------------------------------------- bundled suite


@dataclass(frozen=True)
class Fact:
    line: str
    question: str
    answer: str


@dataclass(frozen=True)
class ColumnKind:
    fmt: str  # money | pct | unit
    lo: int = 0
    hi: int = 0
    unit: str = ""


@dataclass(frozen=True)
class TableDef:
    title: str
    header: tuple[str, ...]
    keys: tuple[str, ...]
    kinds: tuple[ColumnKind, ...]
    notes: tuple[str, ...] = ()
    complex: bool = False


@dataclass(frozen=True)
class DocDef:
    slug: str
    title: str
    facts: tuple[Fact, ...]
    filler: tuple[str, ...] = ()
    simple: TableDef | None = None
    complex: TableDef | None = None


def M(lo: int, hi: int) -> ColumnKind:
    return ColumnKind("money", lo, hi)


def P(lo: int, hi: int) -> ColumnKind:
    # drawn in tenths of a percent
    return ColumnKind("pct", lo * 10, hi * 10)


def U(lo: int, hi: int, unit: str) -> ColumnKind:
    return ColumnKind("unit", lo, hi, unit)

SUITE_DOCS: tuple[DocDef, ...] = (
    DocDef(
        "northwind_health",
        "Northwind Mutual Member Health Plan Summary",
        (
            Fact("The Northwind plan year starts on the first of April.", "When does the Northwind plan year start?", "first of April"),
            Fact("Claims must be submitted within ninety days of the treatment date.", "Within how many days must claims be submitted after treatment?", "ninety days"),
            Fact("The member help desk answers calls on weekdays from 8 am to 6 pm.", "When does the member help desk answer calls?", "8 am to 6 pm"),
            Fact("Dependents remain eligible until their twenty sixth birthday.", "Until which birthday do dependents remain eligible?", "twenty sixth birthday"),
            Fact("Emergency care abroad is reimbursed at the domestic network rate.", "How is emergency care abroad reimbursed?", "domestic network rate"),
        ),
        simple=TableDef(
            "Schedule A. Plan tiers",
            ("Plan Tier", "Annual Premium", "Deductible", "Office Copay"),
            ("Bronze Saver", "Silver Choice", "Gold Select Family", "Platinum Elite", "Catastrophic Young Adult"),
            (M(1200, 9000), M(300, 6000), M(10, 90)),
        ),
        complex=TableDef(
            "Schedule B. Hospital room benefits by room category",
            ("Room Category", "Daily Rate Cap", "Maximum Covered Days", "Member Coinsurance", "Preauthorization Window", "Annual Visit Limit", "Notes"),
            ("Standard Ward", "Semi Private Room", "Private Room", "Intensive Care Unit", "Maternity Suite", "Rehabilitation Bed"),
            (M(400, 4000), U(5, 400, "days"), P(5, 60), U(1, 30, "days"), U(2, 60, "visits")),
            ("Shared bathroom", "", "Upgrade fee applies", "", "Includes newborn care", ""),
            True,
        ),
    ),
    DocDef(
        "contoso_travel",
        "Contoso Travel and Expense Policy",
        (
            Fact("Expense reports are due by the fifth business day of the following month.", "When are expense reports due?", "fifth business day"),
            Fact("Receipts are required for any single purchase above seventy five dollars.", "Above what amount are receipts required for a single purchase?", "seventy five dollars"),
            Fact("Personal mileage is reimbursed at the published federal rate.", "At what rate is personal mileage reimbursed?", "published federal rate"),
            Fact("Trips longer than three weeks need written approval from a vice president.", "Who must approve trips longer than three weeks?", "vice president"),
            Fact("Unused ticket credits are managed centrally by the travel desk.", "Who manages unused ticket credits?", "travel desk"),
        ),
        simple=TableDef(
            "Schedule A. Per diem rates",
            ("Destination Zone", "Lodging Limit", "Meal Allowance", "Incidentals"),
            ("Domestic Metro", "Domestic Regional", "Europe Capital Cities", "Asia Pacific", "Latin America Hubs"),
            (M(90, 600), M(20, 200), M(5, 95)),
        ),
        complex=TableDef(
            "Schedule B. Airfare class eligibility by employee grade",
            ("Employee Grade", "Flight Hours Threshold", "Economy Fare Cap", "Premium Economy Cap", "Business Class Cap", "Advance Booking Days", "Notes"),
            ("Associate", "Senior Associate", "Manager", "Senior Manager", "Director", "Executive Officer"),
            (U(2, 16, "hours"), M(300, 3000), M(800, 5000), M(2000, 12000), U(7, 60, "days")),
            ("", "Economy only on short trips", "", "Lounge access included", "", "Board approval for first class"),
            True,
        ),
    ),
    DocDef(
        "fabrikam_leave",
        "Fabrikam Employee Leave Handbook",
        (
            Fact("Leave requests are submitted through the staff self service portal.", "Through which portal are leave requests submitted?", "staff self service portal"),
            Fact("Public holidays falling on a weekend move to the next Monday.", "What happens to public holidays falling on a weekend?", "next Monday"),
            Fact("Sick leave beyond three consecutive days requires a medical certificate.", "What does sick leave beyond three consecutive days require?", "medical certificate"),
            Fact("Jury service is fully paid for its entire duration.", "How is jury service paid?", "fully paid"),
            Fact("Bereavement leave may be taken within two months of the loss.", "Within what period may bereavement leave be taken?", "two months"),
        ),
        simple=TableDef(
            "Schedule A. Annual leave accrual",
            ("Service Band", "Days Per Year", "Carryover Limit", "Payout Cap"),
            ("Probation Period", "Two To Five Years", "Six To Ten Years", "Over Ten Years", "Senior Leadership Council"),
            (U(10, 40, "days"), U(2, 30, "days"), M(500, 9000)),
        ),
        complex=TableDef(
            "Schedule B. Parental and family leave entitlements",
            ("Leave Type", "Paid Weeks", "Unpaid Weeks", "Notice Period Days", "Salary Replacement", "Minimum Tenure Months", "Documentation"),
            ("Birth Parent", "Non Birth Parent", "Adoption Leave", "Foster Placement", "Family Caregiver", "Surrogacy Leave"),
            (U(1, 40, "weeks"), U(1, 52, "weeks"), U(10, 120, "days"), P(40, 100), U(1, 36, "months")),
            ("Birth certificate", "", "Court order", "Agency letter", "", ""),
            True,
        ),
    ),
    DocDef(
        "tailspin_tax",
        "Tailspin City Property Tax Schedule",
        (
            Fact("Tax bills are mailed to owners in the second week of January.", "When are tax bills mailed to owners?", "second week of January"),
            Fact("Payments can be made in two equal installments.", "In how many installments can payments be made?", "two equal installments"),
            Fact("Senior owners may defer payment until the property is sold.", "Until when may senior owners defer payment?", "property is sold"),
            Fact("Assessment notices list the parcel number on the top right corner.", "Where do assessment notices list the parcel number?", "top right corner"),
            Fact("Disputes are heard by the municipal review board.", "Who hears disputes?", "municipal review board"),
        ),
        simple=TableDef(
            "Schedule A. Residential rates",
            ("Property Class", "Mill Rate", "Exemption Amount", "Late Penalty"),
            ("Single Family Home", "Condominium Unit", "Duplex", "Manufactured Housing Park", "Vacant Residential Lot"),
            (U(11, 49, "mills"), M(5000, 60000), P(1, 25)),
        ),
        complex=TableDef(
            "Schedule B. Commercial assessment bands",
            ("Assessment Band", "Lower Bound", "Upper Bound", "Base Levy", "Marginal Rate", "Appeal Deadline Days", "Notes"),
            ("Retail Small", "Retail Large", "Office Class A", "Office Class B", "Industrial Light", "Warehouse Logistics"),
            (M(10000, 900000), M(100000, 3000000), M(1000, 90000), P(1, 15), U(20, 180, "days")),
            ("", "Phased in over two years", "", "", "Includes storage yards", ""),
            True,
        ),
    ),
    DocDef(
        "woodgrove_retention",
        "Woodgrove Bank Data Retention Policy",
        (
            Fact("Customer account statements are retained for seven years after closure.", "How long are customer account statements retained after closure?", "seven years"),
            Fact("Call recordings are deleted automatically after eighteen months.", "When are call recordings deleted?", "eighteen months"),
            Fact("Backup tapes are stored offsite in a climate controlled vault.", "Where are backup tapes stored?", "climate controlled vault"),
            Fact("The records officer reviews the retention schedule every spring.", "How often does the records officer review the retention schedule?", "every spring"),
            Fact("Legal holds suspend deletion until counsel releases them.", "What suspends deletion until counsel releases it?", "legal holds"),
        ),
        filler=(
            "This document applies to all business units and contractors.",
            "Questions should be directed to the compliance office.",
        ),
    ),
    DocDef(
        "adventure_remote",
        "Adventure Works Remote Work Guidelines",
        (
            Fact("Remote staff must be reachable during the core window of 10 am to 3 pm.", "What is the core window during which remote staff must be reachable?", "10 am to 3 pm"),
            Fact("A home office stipend is paid once in the first payroll cycle.", "When is the home office stipend paid?", "first payroll cycle"),
            Fact("Company laptops must use the encrypted virtual private network.", "Which network must company laptops use?", "encrypted virtual private network"),
            Fact("Working from another country requires clearance from the tax team.", "Who must clear working from another country?", "tax team"),
            Fact("Team offsites are scheduled twice per year at headquarters.", "How often are team offsites scheduled?", "twice per year"),
        ),
        filler=(
            "Managers agree remote arrangements with each employee individually.",
            "These guidelines are revised whenever local law changes.",
        ),
    ),
)

SIMPLE_TEMPLATES = ("What is the {col} for {key}?", "How much is the {col} for {key}?", "What {col} applies to {key}?")
COMPLEX_TEMPLATES = (
    "For {key}, what is the {col}?",
    "What is the {col} listed for {key}?",
    "According to the table, what {col} applies to {key}?",
)
N_SIMPLE, N_COMPLEX = 60, 110


def _format(kind: ColumnKind, v: int) -> str:
    if kind.fmt == "money":
        return f"${v:,}"
    if kind.fmt == "pct":
        return f"{v / 10:.1f}%"
    return f"{v} {kind.unit}"


class _ValuePool:
    """Draws values whose normalized forms are pairwise non-substrings.

    One pool per table, seeded with the prose answers: a wrong row or
    header line can then never contain the expected value.
    """

    def __init__(self, reserved: Sequence[str]):
        self.used = [normalize_answer(r) for r in reserved]

    def _conflicts(self, norm: str) -> bool:
        return any(norm in u or u in norm for u in self.used)

    def draw(self, rng: random.Random, kind: ColumnKind) -> str:
        for _ in range(10_000):
            text = _format(kind, rng.randint(kind.lo, kind.hi))
            norm = normalize_answer(text)
            if not self._conflicts(norm):
                self.used.append(norm)
                return text
        raise RuntimeError(f"value pool exhausted for {kind}")


@dataclass
class Suite:
    pages: dict[str, list[PageSpec]]
    cases: list[QueryCase]


def _fill_table(td: TableDef, pool: _ValuePool, rng: random.Random, drop_one: bool) -> TableSpec:
    rows = []
    for r, key in enumerate(td.keys):
        row = [key] + [pool.draw(rng, k) for k in td.kinds]
        if td.notes:
            row.append(td.notes[r])
        rows.append(row)
    if drop_one:
        r, c = rng.randrange(1, len(rows)), rng.randrange(2, 1 + len(td.kinds))
        rows[r][c] = ""
    return TableSpec(td.title, list(td.header), rows, font_size=8.0 if td.complex else 9.0)


def build_suite(seed: int = 7) -> Suite:
    rng = random.Random(seed)
    reserved = [f.answer for d in SUITE_DOCS for f in d.facts]
    pages: dict[str, list[PageSpec]] = {}
    text_cases, simple_cases, complex_cases = [], [], []
    for d in SUITE_DOCS:
        for i, f in enumerate(d.facts):
            text_cases.append(QueryCase(f"{d.slug}-text-{i}", f.question, (f.answer,), "text"))
        lines = [f.line for f in d.facts]
        doc_pages = []
        if d.simple is not None:
            simple = _fill_table(d.simple, _ValuePool(reserved), rng, drop_one=False)
            doc_pages.append(PageSpec(lines[:3], simple, lines[3:], PORTRAIT, d.title))
            for r, row in enumerate(simple.rows):
                for c in range(1, len(d.simple.header)):
                    q = rng.choice(SIMPLE_TEMPLATES).format(col=simple.header[c], key=row[0])
                    simple_cases.append(QueryCase(f"{d.slug}-simple-{r}-{c}", q, (row[c],), "table_simple"))
        else:
            doc_pages.append(PageSpec(lines, None, list(d.filler), PORTRAIT, d.title))
        if d.complex is not None:
            cx = _fill_table(d.complex, _ValuePool(reserved), rng, drop_one=True)
            doc_pages.append(PageSpec([], cx, ["Amounts shown are maximums per covered event."], LANDSCAPE))
            for r, row in enumerate(cx.rows):
                for c in range(1, 1 + len(d.complex.kinds)):
                    if not row[c]:
                        continue
                    q = rng.choice(COMPLEX_TEMPLATES).format(col=cx.header[c].lower(), key=row[0])
                    complex_cases.append(QueryCase(f"{d.slug}-complex-{r}-{c}", q, (row[c],), "table_complex"))
        pages[d.slug] = doc_pages
    if len(simple_cases) != N_SIMPLE:
        raise AssertionError(f"expected {N_SIMPLE} simple cases, built {len(simple_cases)}")
    keep = sorted(rng.sample(range(len(complex_cases)), N_COMPLEX))
    complex_cases = [complex_cases[i] for i in keep]
    return Suite(pages, text_cases + simple_cases + complex_cases)


def write_suite_corpus(suite: Suite, corpus_dir: str | Path) -> list[Path]:
    corpus_dir = Path(corpus_dir)
    corpus_dir.mkdir(parents=True, exist_ok=True)
    return [write_pdf(corpus_dir / f"{slug}.pdf", pages) for slug, pages in suite.pages.items()]
