"""Row linearization: ``header: value`` concatenation and one-shot LLM rewriting."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .llm_gateway import ChatMessage, ChatRequest
from .table_detect import TableGrid, extract_header

log = logging.getLogger(__name__)

PAIR_SEP = "; "
KV_SEP = ": "
SECTION_DELIM = "---"


class EnrichError(ValueError):
    pass


class LengthMismatch(EnrichError):
    pass


class EmptyRow(EnrichError):
    pass


class MalformedRow(EnrichError):
    pass


@dataclass(frozen=True)
class TableRef:
    doc_id: str
    page_index: int
    table_index: int
    row_index: int

    def __post_init__(self):
        if min(self.page_index, self.table_index, self.row_index) < 0:
            raise ValueError("TableRef components must be non-negative")

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "page_index": self.page_index,
            "table_index": self.table_index,
            "row_index": self.row_index,
        }

    @classmethod
    def from_json(cls, d: dict) -> TableRef:
        return cls(d["doc_id"], d["page_index"], d["table_index"], d["row_index"])


@dataclass(frozen=True)
class EnrichedRow:
    table_ref: TableRef
    text: str
    style: str  # "concat" | "llm"

    def __post_init__(self):
        if not self.text:
            raise ValueError("enriched text must be non-empty")
        if self.style not in ("concat", "llm"):
            raise ValueError(f"unknown style {self.style!r}")

    def to_json(self) -> dict:
        return {"table_ref": self.table_ref.to_json(), "style": self.style, "text": self.text}


def concat_enrich_row(headers: list[str], values: list[str]) -> str:
    if len(headers) != len(values):
        raise LengthMismatch(f"{len(headers)} headers vs {len(values)} values")
    if not headers:
        raise EmptyRow("cannot enrich a row with no cells")
    return PAIR_SEP.join(f"{h}{KV_SEP}{v}" for h, v in zip(headers, values))


def parse_concat_row(text: str) -> list[tuple[str, str]]:
    pairs = []
    for segment in text.split(PAIR_SEP):
        header, sep, value = segment.partition(KV_SEP)
        if not sep:
            raise MalformedRow(f"segment without {KV_SEP!r}: {segment!r}")
        pairs.append((header, value))
    return pairs


def _ref(grid: TableGrid, row_index: int) -> TableRef:
    return TableRef(grid.doc_id, grid.page_index, grid.table_index, row_index)


def concat_enrich_table(grid: TableGrid) -> list[EnrichedRow]:
    headers = extract_header(grid)
    return [
        EnrichedRow(_ref(grid, i), concat_enrich_row(headers, values), "concat")
        for i, values in enumerate(grid.data_rows())
    ]


@dataclass(frozen=True)
class OneShotPrompt:
    system_instruction: str
    example_input: str
    example_output: str
    task_input: str

    def __post_init__(self):
        for name in ("system_instruction", "example_input", "example_output", "task_input"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")


def render_prompt(p: OneShotPrompt) -> str:
    return (
        p.system_instruction
        + "\n\nExample input:\n"
        + p.example_input
        + "\nExample output:\n"
        + p.example_output
        + "\n\nInput:\n"
        + p.task_input
        + "\nOutput:\n"
    )


@dataclass(frozen=True)
class PromptTemplate:
    """A one-shot template; ``task_template`` receives the rows via ``{rows}``."""

    system_instruction: str
    example_input: str
    example_output: str
    task_template: str = "{rows}"

    def build(self, rows: str) -> OneShotPrompt:
        return OneShotPrompt(
            self.system_instruction,
            self.example_input,
            self.example_output,
            self.task_template.replace("{rows}", rows),
        )

    @classmethod
    def parse(cls, text: str) -> PromptTemplate:
        sections: list[list[str]] = [[]]
        for line in text.splitlines():
            if line == SECTION_DELIM:
                sections.append([])
            else:
                sections[-1].append(line)
        if len(sections) != 4:
            raise ValueError(f"prompt template needs 4 sections separated by '---', got {len(sections)}")
        parts = ["\n".join(s).strip("\n") for s in sections]
        if not all(parts):
            raise ValueError("prompt template sections must be non-empty")
        return cls(*parts)

    @classmethod
    def load(cls, path: str | Path | None = None) -> PromptTemplate:
        if path is None:
            text = resources.files("tablerag").joinpath("data/enrich_prompt.txt").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.parse(text)


@dataclass
class EnrichOutcome:
    rows: list[EnrichedRow]
    fallback: bool = False
    reason: str = ""


def llm_enrich_table(
    grid: TableGrid,
    gateway,
    template: PromptTemplate | None = None,
    model_id: str = "gpt-3.5-turbo",
    max_tokens: int = 1024,
) -> EnrichOutcome:
    """Rewrite every data row of ``grid`` with one completion request.

    The reply must contain exactly one non-blank line per data row;
    anything else falls back to the concat rows. Gateway errors propagate.
    """
    template = template or PromptTemplate.load()
    concat_rows = concat_enrich_table(grid)
    prompt = template.build("\n".join(r.text for r in concat_rows))
    request = ChatRequest(
        model_id=model_id,
        messages=(ChatMessage("user", render_prompt(prompt)),),
        temperature=0.0,
        max_tokens=max_tokens,
    )
    response = gateway.complete(request)
    lines = [ln.strip() for ln in response.content.splitlines() if ln.strip()]
    if response.finish == "stop" and len(lines) == len(concat_rows):
        return EnrichOutcome([EnrichedRow(r.table_ref, ln, "llm") for r, ln in zip(concat_rows, lines)])
    reason = f"expected {len(concat_rows)} lines, got {len(lines)} (finish={response.finish})"
    log.info("table %s/%d/%d: llm enrichment fell back: %s", grid.doc_id[:12], grid.page_index, grid.table_index, reason)
    return EnrichOutcome(concat_rows, fallback=True, reason=reason)
