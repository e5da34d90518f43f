"""Reference implementations kept apart from the package code they check."""

from __future__ import annotations

import math
import random


def brute_force_top_k(vectors: dict[str, list[float]], query: list[float], k: int) -> list[tuple[str, float]]:
    scored = [(cid, math.fsum(a * b for a, b in zip(vec, query))) for cid, vec in vectors.items()]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]


def random_unit(rng: random.Random, dim: int) -> list[float]:
    v = [rng.gauss(0, 1) for _ in range(dim)]
    n = math.sqrt(math.fsum(x * x for x in v))
    return [x / n for x in v]
