"""Regenerate the bundled synthetic suite under src/tablerag/data/suite.

Writes the PDF corpus, the labeled query set, a replay run config, and the
two gateway transcripts. Transcripts are recorded by running the mode
comparison once against the scripted mock gateways, then sorted by digest
so the files are stable across runs.

    python3 scripts/build_suite.py [--seed 7] [--out DIR]
"""

from __future__ import annotations

import argparse
import contextlib
import io
import shutil
from pathlib import Path

from tablerag import cli
from tablerag.evaluation import save_queries
from tablerag.llm_gateway import load_transcript, save_transcript
from tablerag.synth import build_suite, write_suite_corpus

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "tablerag" / "data" / "suite"

RUN_CONFIG = """\
# Replays the recorded mock transcripts; no network access needed.
mode = "concat"
index_path = "suite-index.jsonl"

[gateways.enrichment]
backend = "{backend}"
mock_rule = "sentences"
max_tokens = 1024
transcript = "transcripts/enrich.jsonl"

[gateways.generator]
backend = "{backend}"
mock_rule = "extract"
model_id = "llama-2-chat"
transcript = "transcripts/generate.jsonl"
"""


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args()

    out: Path = args.out
    if out.exists():
        shutil.rmtree(out)
    (out / "transcripts").mkdir(parents=True)
    suite = build_suite(args.seed)
    pdfs = write_suite_corpus(suite, out / "corpus")
    save_queries(out / "queries.jsonl", suite.cases)

    (out / "record.toml").write_text(RUN_CONFIG.format(backend="record"))
    with contextlib.redirect_stdout(io.StringIO()) as table:
        code = cli.main(["compare", str(out / "queries.jsonl"), str(out / "corpus"), "--config", str(out / "record.toml")])
    (out / "record.toml").unlink()
    if code:
        raise SystemExit(f"recording run failed with exit code {code}")
    for name in ("enrich.jsonl", "generate.jsonl"):
        path = out / "transcripts" / name
        save_transcript(path, load_transcript(path))

    (out / "suite.toml").write_text(RUN_CONFIG.format(backend="replay"))
    print(f"{len(pdfs)} PDFs, {len(suite.cases)} queries written to {out}")
    print(table.getvalue(), end="")


if __name__ == "__main__":
    main()
