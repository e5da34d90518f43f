"""Compare the three pipeline modes on a freshly generated synthetic suite.

Unlike ``tablerag compare`` on the bundled suite (which replays recorded
transcripts), this regenerates the corpus for any seed and runs the scripted
mock gateways live, so the ordering can be checked across seeds.

    python3 scripts/run_compare.py --seeds 7 8 9 [--k 5] [--out results.json]
"""

from __future__ import annotations

import argparse
import json
import tempfile

from tablerag.evaluation import compare_modes
from tablerag.index import HashedBowEmbedder
from tablerag.llm_gateway import MockGateway
from tablerag.mocks import extract_rule, sentences_rule
from tablerag.pdf_layer import open_document
from tablerag.rag import PipelineMode
from tablerag.synth import build_suite, write_suite_corpus


def run_seed(seed: int, k: int):
    suite = build_suite(seed)
    with tempfile.TemporaryDirectory() as tmp:
        corpus = [open_document(p) for p in write_suite_corpus(suite, tmp)]
    return compare_modes(
        suite.cases,
        list(PipelineMode),
        corpus,
        HashedBowEmbedder,
        MockGateway(default=extract_rule),
        MockGateway(default=sentences_rule),
        k=k,
    )


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[7])
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--out")
    args = ap.parse_args()

    results = {}
    for seed in args.seeds:
        cmp = run_seed(seed, args.k)
        print(f"seed {seed}")
        print(cmp.render_text())
        results[seed] = cmp.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
