"""Deterministic default rules for :class:`~tablerag.llm_gateway.MockGateway`.

``extract`` stands in for the answer generator: it returns the single
context line sharing the most content words with the question.
``sentences`` stands in for the enrichment model: it turns each
``header: value`` row of the task input into one sentence.
"""

from __future__ import annotations

import re
from typing import Callable

from .enrich import MalformedRow, parse_concat_row
from .llm_gateway import ChatRequest, echo_rule

TOKEN_RE = re.compile(r"[^\W_]+")
PROVENANCE_RE = re.compile(r"^\[\d+\] ")

STOPWORDS = frozenset(
    "a an and are as at be by do does for from how in is it of on or per the this to under was what when where "
    "which who whom whose with".split()
)

NOT_FOUND = "I could not find the answer in the provided context."


def content_tokens(text: str) -> set[str]:
    return {t for t in TOKEN_RE.findall(text.lower()) if t not in STOPWORDS}


def extract_rule(request: ChatRequest) -> str:
    text = request.last_user_message()
    lines = text.splitlines()
    q_idx = max((i for i, ln in enumerate(lines) if ln.startswith("Question:")), default=None)
    if q_idx is None:
        question, body = (lines[-1] if lines else ""), lines[:-1]
    else:
        question, body = lines[q_idx][len("Question:"):], lines[:q_idx] + lines[q_idx + 1:]
    wanted = content_tokens(question)
    best, best_score = None, 0
    for ln in body:
        ln = ln.strip()
        if not ln or ln == "Context:" or PROVENANCE_RE.match(ln):
            continue
        score = len(wanted & content_tokens(ln))
        if score > best_score:
            best, best_score = ln, score
    return best if best is not None else NOT_FOUND


def _sentence(line: str) -> str:
    try:
        pairs = [(h, v) for h, v in parse_concat_row(line) if v.strip()]
    except MalformedRow:
        return line.strip()
    if not pairs:
        return "This row lists no values."
    if len(pairs) == 1:
        return f"{pairs[0][0]} is {pairs[0][1]}."
    (h0, v0), rest = pairs[0], pairs[1:]
    clauses = [f"{h} {v}" for h, v in rest]
    body = clauses[0] if len(clauses) == 1 else ", ".join(clauses[:-1]) + " and " + clauses[-1]
    return f"{v0} ({h0}) has {body}."


def sentences_rule(request: ChatRequest) -> str:
    text = request.last_user_message()
    start = text.rfind("\nInput:\n")
    task = text[start + len("\nInput:\n"):] if start >= 0 else text
    if task.endswith("\nOutput:\n"):
        task = task[: -len("\nOutput:\n")]
    # lines keep trailing spaces: a row ending in an empty cell ends with ": "
    return "\n".join(_sentence(ln) for ln in task.splitlines() if ln.strip())


RULES: dict[str, Callable[[ChatRequest], str]] = {
    "echo": echo_rule,
    "extract": extract_rule,
    "sentences": sentences_rule,
}


def resolve_rule(name: str) -> Callable[[ChatRequest], str]:
    try:
        return RULES[name]
    except KeyError:
        raise ValueError(f"unknown mock rule {name!r}; choose from {sorted(RULES)}") from None
