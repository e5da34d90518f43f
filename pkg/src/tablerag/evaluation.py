"""Labeled query sets, answer judging and per-category accuracy reports."""

from __future__ import annotations

import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .index import VectorIndex
from .llm_gateway import Gateway, GatewayError
from .pdf_layer import SourceDocument
from .rag import AnswerTemplate, IngestOptions, PipelineMode, answer, ingest

CATEGORIES = ("text", "table_simple", "table_complex")
TABLE_CATEGORIES = ("table_simple", "table_complex")


class ZeroTotal(ValueError):
    pass


class QuerySetError(ValueError):
    def __init__(self, path: str, lineno: int, cause: str):
        self.path, self.lineno = path, lineno
        super().__init__(f"{path}:{lineno}: {cause}")


class EvalIncomplete(Exception):
    """A gateway failure stopped the run; ``report`` holds the cases scored so far."""

    def __init__(self, report: EvalReport, cause: BaseException):
        self.report = report
        self.cause = cause
        super().__init__(f"evaluation aborted after {report.overall.total} cases: {cause}")


@dataclass(frozen=True)
class QueryCase:
    id: str
    question: str
    expected: tuple[str, ...]
    category: str

    def __post_init__(self):
        object.__setattr__(self, "expected", tuple(self.expected))
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not self.question:
            raise ValueError("question must be non-empty")
        if not self.expected or not all(self.expected):
            raise ValueError("expected must be a non-empty list of non-empty strings")

    def to_json(self) -> dict:
        return {"id": self.id, "question": self.question, "expected": list(self.expected), "category": self.category}


def load_queries(path: str | Path) -> list[QueryCase]:
    cases, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                case = QueryCase(str(d["id"]), d["question"], tuple(d["expected"]), d["category"])
            except (ValueError, KeyError, TypeError) as exc:
                raise QuerySetError(str(path), lineno, str(exc)) from exc
            if case.id in seen:
                raise QuerySetError(str(path), lineno, f"duplicate id {case.id!r}")
            seen.add(case.id)
            cases.append(case)
    return cases


def save_queries(path: str | Path, cases: Sequence[QueryCase]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in cases:
            fh.write(json.dumps(c.to_json(), ensure_ascii=False) + "\n")


_DROP_RE = re.compile(r"[^\w\s.%]|_")
_WS_RE = re.compile(r"\s+")


def normalize_answer(text: str) -> str:
    return _WS_RE.sub(" ", _DROP_RE.sub("", text.lower())).strip()


def judge(answer_text: str, expected: Sequence[str]) -> bool:
    if not expected:
        raise ValueError("expected must be non-empty")
    got = normalize_answer(answer_text)
    return any(normalize_answer(e) in got for e in expected)


def accuracy_pct(correct: int, total: int) -> float:
    """``100 * correct / total`` rounded half-up to one decimal."""
    if total < 1:
        raise ZeroTotal("accuracy needs at least one case")
    if not 0 <= correct <= total:
        raise ValueError(f"correct={correct} outside [0, {total}]")
    tenths = math.floor(Fraction(1000 * correct, total) + Fraction(1, 2))
    return tenths / 10


@dataclass(frozen=True)
class Score:
    correct: int = 0
    total: int = 0

    @property
    def accuracy_pct(self) -> float | None:
        return accuracy_pct(self.correct, self.total) if self.total else None

    def __add__(self, other: Score) -> Score:
        return Score(self.correct + other.correct, self.total + other.total)

    def to_json(self) -> dict:
        return {"correct": self.correct, "total": self.total, "accuracy_pct": self.accuracy_pct}


@dataclass(frozen=True)
class CaseResult:
    id: str
    category: str
    correct: bool
    answer: str = ""
    top_chunk: str | None = None

    def to_json(self) -> dict:
        return {"id": self.id, "category": self.category, "correct": self.correct, "answer": self.answer, "top_chunk": self.top_chunk}


@dataclass(frozen=True)
class EvalReport:
    mode: PipelineMode | None
    categories: dict[str, Score]
    complete: bool = True
    results: tuple[CaseResult, ...] = field(default=(), compare=False)

    @property
    def table_combined(self) -> Score:
        return sum((self.categories[c] for c in TABLE_CATEGORIES), Score())

    @property
    def overall(self) -> Score:
        return sum((self.categories[c] for c in CATEGORIES), Score())

    def to_json(self, with_results: bool = False) -> dict:
        d = {
            "mode": self.mode.value if self.mode else None,
            "complete": self.complete,
            "categories": {c: self.categories[c].to_json() for c in CATEGORIES},
            "table_combined": self.table_combined.to_json(),
            "overall": self.overall.to_json(),
        }
        if with_results:
            d["results"] = [r.to_json() for r in self.results]
        return d

    def render_text(self) -> str:
        return render_table([self])


def report_from_counts(
    counts: dict[str, tuple[int, int]], mode: PipelineMode | None = None, complete: bool = True
) -> EvalReport:
    """Build a report from per-category ``(correct, total)`` pairs.

    A bare ``"table"`` key is booked under ``table_complex`` so that a
    two-way text/table split can be fed in directly.
    """
    cats = {c: Score() for c in CATEGORIES}
    for key, (correct, total) in counts.items():
        cat = "table_complex" if key == "table" else key
        if cat not in cats:
            raise ValueError(f"unknown category {key!r}")
        if not 0 <= correct <= total:
            raise ValueError(f"{key}: correct={correct} outside [0, {total}]")
        cats[cat] = cats[cat] + Score(correct, total)
    return EvalReport(mode, cats, complete)


def aggregate(results: Sequence[CaseResult], mode: PipelineMode | None, complete: bool = True) -> EvalReport:
    cats = {c: Score() for c in CATEGORIES}
    for r in results:
        cats[r.category] = cats[r.category] + Score(int(r.correct), 1)
    return EvalReport(mode, cats, complete, tuple(results))


def run_eval(
    cases: Sequence[QueryCase],
    mode: PipelineMode,
    index: VectorIndex,
    embedder,
    generator: Gateway,
    k: int = 5,
    template: AnswerTemplate | None = None,
    model_id: str = "llama-2-chat",
    jobs: int = 1,
) -> EvalReport:
    if not cases:
        raise ZeroTotal("query set is empty")
    template = template or AnswerTemplate.load()

    def one(case: QueryCase) -> CaseResult:
        ans = answer(case.question, index, embedder, generator, k, template, model_id, mode=mode)
        top = ans.supporting[0][0] if ans.supporting else None
        return CaseResult(case.id, case.category, judge(ans.text, case.expected), ans.text, top)

    results: list[CaseResult] = []
    try:
        if jobs > 1:
            with ThreadPoolExecutor(jobs) as pool:
                for r in pool.map(one, cases):
                    results.append(r)
        else:
            for case in cases:
                results.append(one(case))
    except GatewayError as exc:
        raise EvalIncomplete(aggregate(results, mode, complete=False), exc) from exc
    return aggregate(results, mode)


def _cell(score: Score) -> str:
    if not score.total:
        return "n/a"
    return f"{score.accuracy_pct:.1f} ({score.correct}/{score.total})"


def render_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text comparison with text / table / overall accuracy columns."""
    header = ["Methodology", "Text Queries Accuracy (%)", "Table Queries Accuracy (%)", "Overall Accuracy (%)"]
    rows = [header]
    for r in reports:
        name = f"{r.mode.label}: {r.mode.description}" if r.mode else "(counts)"
        if not r.complete:
            name += " [incomplete]"
        rows.append([name, _cell(r.categories["text"]), _cell(r.table_combined), _cell(r.overall)])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for n, row in enumerate(rows):
        lines.append(" | ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))).rstrip())
        if n == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Comparison:
    reports: tuple[EvalReport, ...]
    stats: dict[str, list[dict]] = field(default_factory=dict, compare=False)

    def report(self, mode: PipelineMode) -> EvalReport:
        for r in self.reports:
            if r.mode is mode:
                return r
        raise KeyError(mode)

    def to_json(self) -> dict:
        return {
            "modes": [r.mode.value for r in self.reports],
            "reports": [r.to_json() for r in self.reports],
            "ingest": self.stats,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def render_text(self) -> str:
        return render_table(self.reports)


def compare_modes(
    cases: Sequence[QueryCase],
    modes: Sequence[PipelineMode],
    corpus: Sequence[SourceDocument],
    make_embedder,
    generator: Gateway,
    enrichment_gateway: Gateway | None = None,
    options: IngestOptions | None = None,
    k: int = 5,
    template: AnswerTemplate | None = None,
    model_id: str = "llama-2-chat",
    jobs: int = 1,
) -> Comparison:
    """Ingest ``corpus`` into a fresh index per mode and evaluate each.

    ``make_embedder`` is a zero-argument factory so modes never share state.
    """
    if len(modes) < 2:
        raise ValueError("compare_modes needs at least two modes")
    reports, stats = [], {}
    for mode in modes:
        embedder = make_embedder()
        index = VectorIndex(embedder.dim, embedder.embedder_id)
        gw = enrichment_gateway if mode is PipelineMode.LLM else None
        stats[mode.value] = [ingest(doc, mode, index, embedder, gw, options).to_json() for doc in corpus]
        reports.append(run_eval(cases, mode, index, embedder, generator, k, template, model_id, jobs))
    return Comparison(tuple(reports), stats)
