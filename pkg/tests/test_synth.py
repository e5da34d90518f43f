from __future__ import annotations

from collections import Counter

import pytest

from tablerag.evaluation import load_queries
from tablerag.synth import build_suite, random_grid_fixture, write_suite_corpus

from conftest import SUITE_DIR


def test_suite_shape():
    suite = build_suite()
    counts = Counter(c.category for c in suite.cases)
    assert counts == {"text": 30, "table_simple": 60, "table_complex": 110}
    assert len({c.id for c in suite.cases}) == 200
    assert len(suite.pages) >= 5


def test_bundled_suite_is_current(tmp_path):
    suite = build_suite()
    assert load_queries(SUITE_DIR / "queries.jsonl") == suite.cases
    for path in write_suite_corpus(suite, tmp_path):
        assert path.read_bytes() == (SUITE_DIR / "corpus" / path.name).read_bytes(), path.name


@pytest.mark.parametrize("seed", range(20))
def test_fixture_guarantees(seed):
    fx = random_grid_fixture(seed)
    assert all(sum(1 for t in row if t) >= 2 for row in fx.grid)
    assert all(sum(1 for row in fx.grid if row[c]) >= 2 for c in range(len(fx.grid[0])))
