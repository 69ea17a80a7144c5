"""Sequencing stage of the GA: orders the visits of one vehicle.

Chains always keep TourBegin first and TourEnd last; operators only touch
the inner visits (except the option mutators, which may also change the
start/end location choice).
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from ..model import Instance, StopVisit
from ..problem import Problem, get_problem
from ..score import tour_eval
from .select import SELECTIONS, select_parents

TSP_CROSSOVERS = ("Random", "Ordered", "PartiallyMapped")
TSP_MUTATORS = ("Reverse", "SimpleMove", "SimpleSwap", "MultiOpt", "NeighborhoodSwap",
                "SavingsTSP", "Options", "OptionsChain")
MAX_RETRIES = 10


@dataclass
class TspParams:
    """Sequencing-stage settings (not taken from any published table)."""

    population_size: Optional[int] = None
    mutation_prob: float = 0.5
    max_unimproved: int = 50
    max_runtime: float = 10.0


def tsp_population_size(n_stops: int, pd_pairs: int, multi_option: int) -> int:
    return max(4, math.ceil(0.1 * n_stops + 1 + pd_pairs + 2 * multi_option))


# --- precedence helpers ----------------------------------------------------

def repair(pb: Problem, inner: list[StopVisit]) -> list[StopVisit]:
    """Swap every delivery that precedes its own pickup with that pickup."""
    nos = pb.n_order_stops
    pos = {sv.stop: i for i, sv in enumerate(inner)}
    for i, sv in enumerate(inner):
        s = sv.stop
        if s < nos and s & 1:
            j = pos.get(s - 1)
            if j is not None and j > i:
                inner[i], inner[j] = inner[j], inner[i]
                pos[s] = j
                pos[s - 1] = i
    return inner


def precedence_ok(pb: Problem, inner: Sequence[StopVisit]) -> bool:
    nos = pb.n_order_stops
    seen = set()
    stops = {sv.stop for sv in inner}
    for sv in inner:
        s = sv.stop
        if s < nos and s & 1 and (s - 1) in stops and (s - 1) not in seen:
            return False
        seen.add(s)
    return True


def _partner(s: int) -> int:
    return s ^ 1


# --- crossovers -----------------------------------------------------------

def cx_random(pb, a, b, rng):
    """Take the first unused visit of a randomly chosen parent, repeatedly."""
    ia = ib = 0
    used = set()
    child = []
    n = len(a)
    while len(child) < n:
        if rng.random() < 0.5:
            while a[ia].stop in used:
                ia += 1
            sv = a[ia]
        else:
            while b[ib].stop in used:
                ib += 1
            sv = b[ib]
        used.add(sv.stop)
        child.append(sv)
    return child


def cx_ordered(pb, a, b, rng, cuts=None):
    """Two-point crossover: segment of ``a`` in place, the rest in ``b``'s order."""
    n = len(a)
    if n < 2:
        return list(a)
    i, j = cuts if cuts is not None else sorted(rng.sample(range(n + 1), 2))
    seg = a[i:j]
    in_seg = {sv.stop for sv in seg}
    rest = [sv for sv in b if sv.stop not in in_seg]
    child = rest[:i] + seg + rest[i:]
    return repair(pb, child)


def cx_partially_mapped(pb, a, b, rng, cuts=None):
    """Segment of ``a`` kept; the other visits go first, ordered by mean parent index."""
    n = len(a)
    if n < 2:
        return list(a)
    i, j = cuts if cuts is not None else sorted(rng.sample(range(n + 1), 2))
    seg = a[i:j]
    in_seg = {sv.stop for sv in seg}
    pa = {sv.stop: k for k, sv in enumerate(a)}
    pbx = {sv.stop: k for k, sv in enumerate(b)}
    rest = sorted((sv for sv in b if sv.stop not in in_seg),
                  key=lambda sv: (pa[sv.stop] + pbx[sv.stop], pa[sv.stop]))
    return repair(pb, rest + seg)


_CX = {"Random": cx_random, "Ordered": cx_ordered, "PartiallyMapped": cx_partially_mapped}


# --- mutators (inner visit lists; None asks the caller for another operator) ---

def simple_swap(inner: list, i: int, j: int) -> list:
    out = list(inner)
    out[i], out[j] = out[j], out[i]
    return out


def mut_reverse(pb, vi, chain, rng):
    inner = chain[1:-1]
    if len(inner) < 2:
        return None
    i, j = sorted(rng.sample(range(len(inner)), 2))
    inner[i:j + 1] = inner[i:j + 1][::-1]
    return [chain[0], *repair(pb, inner), chain[-1]]


def _move_positions(pb, inner: list, s: int) -> range:
    """Insertion indices for stop ``s`` into ``inner`` (``s`` removed) that keep precedence."""
    nos = pb.n_order_stops
    if s >= nos:
        return range(len(inner) + 1)
    mate = _partner(s)
    pos = next((k for k, sv in enumerate(inner) if sv.stop == mate), None)
    if pos is None:
        return range(len(inner) + 1)
    return range(0, pos + 1) if not s & 1 else range(pos + 1, len(inner) + 1)


def mut_simple_move(pb, vi, chain, rng):
    inner = chain[1:-1]
    if len(inner) < 2:
        return None
    i = rng.randrange(len(inner))
    sv = inner.pop(i)
    slots = [k for k in _move_positions(pb, inner, sv.stop) if k != i]
    if not slots:
        return None
    inner.insert(rng.choice(slots), sv)
    return [chain[0], *inner, chain[-1]]


def mut_simple_swap(pb, vi, chain, rng):
    inner = chain[1:-1]
    if len(inner) < 2:
        return None
    i, j = rng.sample(range(len(inner)), 2)
    return [chain[0], *repair(pb, simple_swap(inner, i, j)), chain[-1]]


def mut_multi_opt(pb, vi, chain, rng):
    out = chain
    for _ in range(rng.randint(1, 3)):
        op = mut_simple_move if rng.random() < 0.5 else mut_simple_swap
        nxt = op(pb, vi, out, rng)
        if nxt is not None:
            out = nxt
    return out if out is not chain else None


def mut_neighborhood_swap(pb, vi, chain, rng):
    """Best precedence-valid swap partner for one random visit (if it improves)."""
    inner = chain[1:-1]
    n = len(inner)
    if n < 2:
        return None
    i = rng.randrange(n)
    best = tour_eval(pb, vi, chain).key()
    best_chain = None
    for j in range(n):
        if j == i:
            continue
        cand = simple_swap(inner, i, j)
        if not precedence_ok(pb, cand):
            continue
        full = [chain[0], *cand, chain[-1]]
        k = tour_eval(pb, vi, full).key()
        if k < best:
            best, best_chain = k, full
    return best_chain if best_chain is not None else list(chain)


def mut_savings(pb, vi, chain, rng):
    """Relocate the visit whose removal saves the most distance beyond its best reinsertion."""
    inner = chain[1:-1]
    if len(inner) < 2:
        return None
    dist = pb.dist
    opts = pb.opts
    locs = [opts[s][o] for s, o in chain]
    best_gain, best_move = 0, None
    for i in range(1, len(chain) - 1):
        a, x, b = locs[i - 1], locs[i], locs[i + 1]
        gain = dist[a][x] + dist[x][b] - dist[a][b]
        rest = inner[:i - 1] + inner[i:]
        rlocs = locs[:i] + locs[i + 1:]
        for k in _move_positions(pb, rest, chain[i].stop):
            if k == i - 1:
                continue
            p, q = rlocs[k], rlocs[k + 1]
            g = gain - (dist[p][x] + dist[x][q] - dist[p][q])
            if g > best_gain:
                best_gain, best_move = g, (i - 1, k)
    if best_move is None:
        return None
    i, k = best_move
    sv = inner.pop(i)
    inner.insert(k, sv)
    return [chain[0], *inner, chain[-1]]


def _multi_positions(pb, chain):
    return [k for k, sv in enumerate(chain) if len(pb.opts[sv.stop]) > 1]


def mut_options(pb, vi, chain, rng):
    ks = _multi_positions(pb, chain)
    if not ks:
        return None
    k = rng.choice(ks)
    sv = chain[k]
    n = len(pb.opts[sv.stop])
    new = rng.choice([o for o in range(n) if o != sv.option])
    out = list(chain)
    out[k] = StopVisit(sv.stop, new)
    return out


def mut_options_chain(pb, vi, chain, rng):
    ks = _multi_positions(pb, chain)
    if not ks:
        return None
    out = list(chain)
    for k in ks:
        sv = out[k]
        out[k] = StopVisit(sv.stop, (sv.option + 1) % len(pb.opts[sv.stop]))
    return out


_MUT = {"Reverse": mut_reverse, "SimpleMove": mut_simple_move, "SimpleSwap": mut_simple_swap,
        "MultiOpt": mut_multi_opt, "NeighborhoodSwap": mut_neighborhood_swap,
        "SavingsTSP": mut_savings, "Options": mut_options, "OptionsChain": mut_options_chain}


def crossover_chain(pb: Problem, kind: str, a: list, b: list, rng) -> list:
    inner = _CX[kind](pb, a[1:-1], b[1:-1], rng)
    return [a[0], *inner, a[-1]]


def mutate_chain(pb: Problem, vi: int, chain: list, rng, kind: Optional[str] = None) -> list:
    """Apply ``kind`` (or a random mutator); on a retry signal try other mutators."""
    kinds = [kind] if kind else []
    for _ in range(MAX_RETRIES):
        k = kinds.pop() if kinds else rng.choice(TSP_MUTATORS)
        out = _MUT[k](pb, vi, list(chain), rng)
        if out is not None:
            return out
    return list(chain)


# --- public single-operator API ---------------------------------------------

def tsp_crossover(kind: str, a: Sequence[StopVisit], b: Sequence[StopVisit], rng,
                  inst: Optional[Instance] = None, matrix=None) -> list[StopVisit]:
    pb = get_problem(inst, matrix) if inst is not None else _LooseProblem()
    return crossover_chain(pb, kind, list(a), list(b), rng)


def tsp_mutate(kind: str, chain: Sequence[StopVisit], inst: Instance, matrix, rng,
               vehicle: Optional[str] = None) -> Optional[list[StopVisit]]:
    """Single mutator application; ``None`` is the retry signal."""
    pb = get_problem(inst, matrix)
    vi = pb.vehicle_index[vehicle] if vehicle else _vehicle_from_chain(pb, chain)
    return _MUT[kind](pb, vi, list(chain), rng)


def _vehicle_from_chain(pb: Problem, chain) -> int:
    return (chain[0].stop - pb.n_order_stops) // 2


class _LooseProblem:
    """Stand-in when no instance is given: no precedence repair."""

    n_order_stops = -1


# --- the sequencing GA ---------------------------------------------------------

def truncate(pool: list, size: int) -> list:
    """Best ``size`` entries, distinct chains first; duplicates only fill up."""
    pool = sorted(pool, key=lambda x: x[0])
    seen = set()
    uniq, dup = [], []
    for item in pool:
        t = tuple(item[1])
        (dup if t in seen else uniq).append(item)
        seen.add(t)
    return (uniq + dup)[:size]


def nearest_neighbor_chain(pb: Problem, vi: int, stops: Sequence[int], rng) -> list[StopVisit]:
    """Random first pickup, then repeatedly the closest reachable visit."""
    nos = pb.n_order_stops
    dist = pb.dist
    begin, end = pb.begin_stop[vi], pb.end_stop[vi]
    pending = set(stops)
    visible = [s for s in stops if not (s < nos and s & 1 and (s - 1) in pending)]
    first = rng.choice(visible)
    cur_opt = pb.nearest_option(first, pb.opts[begin][0])
    chain = [StopVisit(begin, 0), StopVisit(first, cur_opt)]
    pending.discard(first)
    cur = pb.opts[first][cur_opt]
    while pending:
        best = None
        for s in sorted(pending):
            if s < nos and s & 1 and (s - 1) in pending:
                continue
            o = pb.nearest_option(s, cur)
            d = dist[cur][pb.opts[s][o]]
            if best is None or d < best[0]:
                best = (d, s, o)
        _, s, o = best
        chain.append(StopVisit(s, o))
        pending.discard(s)
        cur = pb.opts[s][o]
    chain.append(StopVisit(end, pb.nearest_option(end, cur)))
    # start option nearest to the first stop
    chain[0] = StopVisit(begin, pb.nearest_option(begin, pb.opts[first][cur_opt]))
    return chain


def solve_tsp_ga(pb: Problem, vi: int, stops: Sequence[int], rng: random.Random,
                 deadline: float = math.inf, params: Optional[TspParams] = None) -> list[StopVisit]:
    params = params or TspParams()
    deadline = min(deadline, time.monotonic() + params.max_runtime)
    stops = list(stops)
    if not stops:
        return pb.empty_chain(vi)
    nos = pb.n_order_stops
    present = set(stops)
    pd_pairs = sum(1 for s in stops if s < nos and not s & 1 and (s + 1) in present
                   and pb.is_pd_order[s >> 1])
    multi = sum(1 for s in [*stops, pb.begin_stop[vi], pb.end_stop[vi]] if len(pb.opts[s]) > 1)
    size = params.population_size or tsp_population_size(len(stops), pd_pairs, multi)

    cache: dict[tuple, tuple] = {}

    def score(chain):
        t = tuple(chain)
        k = cache.get(t)
        if k is None:
            k = tour_eval(pb, vi, chain).key()
            cache[t] = k
        return k

    seed = nearest_neighbor_chain(pb, vi, stops, rng)
    pop = [(score(seed), seed)]
    tries = 0
    while len(pop) < size and tries < 20 * size:
        tries += 1
        c = mutate_chain(pb, vi, pop[rng.randrange(len(pop))][1], rng)
        pop.append((score(c), c))
    pop.sort(key=lambda x: x[0])
    best = pop[0]
    if len(stops) <= 1 and multi == 0:
        return best[1]
    unimproved = 0
    while unimproved < params.max_unimproved and time.monotonic() < deadline:
        offspring = []
        while len(offspring) < size:
            a, b = select_parents(pop, rng.choice(SELECTIONS), rng)
            child = crossover_chain(pb, rng.choice(TSP_CROSSOVERS), a[1], b[1], rng)
            if rng.random() < params.mutation_prob:
                child = mutate_chain(pb, vi, child, rng)
            offspring.append((score(child), child))
        pop = truncate(pop + offspring, size)
        if pop[0][0] < best[0]:
            best = pop[0]
            unimproved = 0
        else:
            unimproved += 1
    return best[1]


def run_tsp_ga(inst: Instance, matrix, vehicle: str, stops: Sequence, params: Optional[TspParams] = None,
               rng: Optional[random.Random] = None) -> list[StopVisit]:
    """Order the given stops (indices or ids from ``expand_stops``) for ``vehicle``."""
    pb = get_problem(inst, matrix)
    ids = {s.id: i for i, s in enumerate(pb.stops)}
    idx = [ids[s] if isinstance(s, str) else int(s) for s in stops]
    return solve_tsp_ga(pb, pb.vehicle_index[vehicle], idx, rng or random.Random(0), params=params)
