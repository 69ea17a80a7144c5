"""Parent selection over a population sorted best-first."""

from __future__ import annotations

import random
from typing import Sequence, TypeVar

T = TypeVar("T")

SELECTIONS = ("Uniform", "RankWeighted", "Tournament")
TOURNAMENT_SIZE = 10


def rank_pick(n: int, rng: random.Random, exclude: int = -1) -> int:
    """Index drawn with weight ``n - rank`` (rank 0 is the best)."""
    total = n * (n + 1) // 2
    if exclude >= 0:
        total -= n - exclude
    r = rng.random() * total
    for i in range(n):
        if i == exclude:
            continue
        r -= n - i
        if r < 0:
            return i
    return n - 1 if exclude != n - 1 else n - 2


def tournament_pick(n: int, rng: random.Random, exclude: int = -1) -> int:
    """Knockout among a random sample of up to ten; lower index wins a duel."""
    pool = [i for i in range(n) if i != exclude]
    field = rng.sample(pool, min(TOURNAMENT_SIZE, len(pool)))
    while len(field) > 1:
        nxt = [min(field[k], field[k + 1]) for k in range(0, len(field) - 1, 2)]
        if len(field) % 2:
            nxt.append(field[-1])
        field = nxt
    return field[0]


def select_parents(pop: Sequence[T], strategy: str, rng: random.Random) -> tuple[T, T]:
    n = len(pop)
    if n < 2:
        raise ValueError("need at least two individuals")
    if strategy == "Uniform":
        i, j = rng.sample(range(n), 2)
    elif strategy == "RankWeighted":
        i = rank_pick(n, rng)
        j = rank_pick(n, rng, exclude=i)
    elif strategy == "Tournament":
        i = tournament_pick(n, rng)
        j = tournament_pick(n, rng, exclude=i)
    else:
        raise ValueError(f"unknown selection {strategy!r}")
    return pop[i], pop[j]
