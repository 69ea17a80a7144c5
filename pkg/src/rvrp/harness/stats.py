"""Summary statistics and the two-sided Wilcoxon signed-rank test."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

EXACT_MAX_N = 25


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min(W+, W-)
    p_value: float
    reject: bool
    n: int  # non-zero differences
    method: str  # exact | normal | degenerate


def signed_ranks(diffs: Sequence[float]) -> list[float]:
    """Average ranks of |d| (ties share their mean rank), signed like d."""
    order = sorted(range(len(diffs)), key=lambda i: abs(diffs[i]))
    ranks = [0.0] * len(diffs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and abs(diffs[order[j + 1]]) == abs(diffs[order[i]]):
            j += 1
        r = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = r
        i = j + 1
    return [math.copysign(r, d) for r, d in zip(ranks, diffs)]


def exact_lower_tail(ranks: Sequence[float], w: float) -> float:
    """P(W+ <= w) under H0 by counting sign patterns; ranks may be half-integers."""
    doubled = [round(2 * r) for r in ranks]
    total = sum(doubled)
    counts = [0] * (total + 1)
    counts[0] = 1
    top = 0
    for r in doubled:
        for s in range(top, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
        top += r
    limit = math.floor(2 * w + 1e-9)
    return sum(counts[: limit + 1]) / 2 ** len(ranks)


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float], alpha: float = 0.05) -> WilcoxonResult:
    if len(a) != len(b):
        raise ValueError("samples must be paired (equal length)")
    if len(a) < 5:
        raise ValueError("need at least 5 pairs")
    diffs = [x - y for x, y in zip(a, b) if x != y]
    n = len(diffs)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, False, 0, "degenerate")
    ranks = signed_ranks(diffs)
    w_plus = math.fsum(r for r in ranks if r > 0)
    w_minus = math.fsum(-r for r in ranks if r < 0)
    w = min(w_plus, w_minus)
    if n <= EXACT_MAX_N:
        p = min(1.0, 2 * exact_lower_tail([abs(r) for r in ranks], w))
        method = "exact"
    else:
        mean = n * (n + 1) / 4
        ties: dict[float, int] = {}
        for r in ranks:
            ties[abs(r)] = ties.get(abs(r), 0) + 1
        var = n * (n + 1) * (2 * n + 1) / 24 - sum(t ** 3 - t for t in ties.values()) / 48
        p = 1.0 if var <= 0 else math.erfc(abs(w - mean) / math.sqrt(var) / math.sqrt(2))
        method = "normal"
    return WilcoxonResult(w, p, p < alpha, n, method)


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    if not values:
        return math.nan, math.nan
    m = statistics.fmean(values)
    return m, statistics.stdev(values) if len(values) > 1 else 0.0
