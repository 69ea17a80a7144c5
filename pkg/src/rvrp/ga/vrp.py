"""Assignment stage of the GA: which vehicle serves which order."""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..assignment import (Candidate, Chain, Clock, StageEvaluator, append_order, finish,
                          initial_chains, loads_for, order_locs, order_to_chain_distance,
                          orders_on, place_order, remove_orders, vehicle_of)
from ..model import Instance, Solution, StopVisit
from ..problem import Problem, get_problem
from ..score import EvaluatedSolution, Score, chains_by_index, tour_eval
from .select import SELECTIONS, select_parents
from .tsp import TspParams, solve_tsp_ga

log = logging.getLogger(__name__)

VRP_CROSSOVERS = ("Overlap", "ScoreBased", "Selection")
VRP_MUTATORS = ("ClearVehicle", "SwapVehicle", "Outlier", "MoveOrder", "CloseToOtherChain", "Savings")
MAX_RETRIES = 10


@dataclass
class GaParams:
    population_size: Optional[int] = None
    mutation_prob: float = 0.5
    max_unimproved: int = 500
    max_runtime: float = 300.0
    rng_seed: int = 0
    tsp: TspParams = field(default_factory=TspParams)

    def __post_init__(self):
        if self.population_size is not None and self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must lie in [0, 1]")


@dataclass
class Individual:
    solution: Solution
    score: Score


def population_formula(n_orders: int, n_vehicles: int, n_pd: int, n_multi: int) -> int:
    return max(4, math.ceil(0.1 * n_orders + n_vehicles ** 1.25 + n_pd + 2 * n_multi))


def default_population_size(inst: Instance) -> int:
    pb = get_problem(inst, None)
    multi = sum(1 for o in pb.opts if len(o) > 1)
    return population_formula(pb.n_orders, pb.n_vehicles, pb.n_pd_orders, multi)


# --- crossovers ----------------------------------------------------------------

def _fill(pb: Problem, chains: list[Chain], missing: Sequence[int], rng) -> list[Chain]:
    loads = loads_for(pb, chains)
    missing = list(missing)
    rng.shuffle(missing)
    for o in missing:
        place_order(pb, chains, loads, o)
    return chains


def _copy_chains(pb: Problem, picks: Sequence[Chain], order: Sequence[int]) -> tuple[list[Chain], list[int]]:
    """Copy ``picks[v]`` for vehicles in ``order``; orders already taken are skipped."""
    nos = pb.n_order_stops
    taken = [False] * pb.n_orders
    out: list[Optional[Chain]] = [None] * len(picks)
    for v in order:
        keep = []
        for sv in picks[v][1:-1]:
            if sv.stop < nos and taken[sv.stop >> 1]:
                continue
            keep.append(sv)
        for sv in keep:
            if sv.stop < nos:
                taken[sv.stop >> 1] = True
        out[v] = [pb.empty_chain(v)[0], *keep, pb.empty_chain(v)[1]]
    missing = [o for o in range(pb.n_orders) if not taken[o]]
    return out, missing


def cx_overlap(pb, a: Candidate, b: Candidate, rng) -> list[Chain]:
    wa, wb = vehicle_of(pb, a.chains), vehicle_of(pb, b.chains)
    agree = {o for o in range(pb.n_orders) if wa[o] == wb[o]}
    chains = [remove_orders(pb, c, set(range(pb.n_orders)) - agree) for c in a.chains]
    return _fill(pb, chains, sorted(set(range(pb.n_orders)) - agree), rng)


def cx_score_based(pb, a: Candidate, b: Candidate, rng) -> list[Chain]:
    picks = [ca if ta.key() <= tb.key() else cb
             for ca, cb, ta, tb in zip(a.chains, b.chains, a.tours, b.tours)]
    chains, missing = _copy_chains(pb, picks, range(pb.n_vehicles))
    return _fill(pb, chains, missing, rng)


def cx_selection(pb, a: Candidate, b: Candidate, rng) -> list[Chain]:
    picks = [ca if rng.random() < 0.5 else cb for ca, cb in zip(a.chains, b.chains)]
    order = list(range(pb.n_vehicles))
    rng.shuffle(order)
    chains, missing = _copy_chains(pb, picks, order)
    return _fill(pb, chains, missing, rng)


_CX = {"Overlap": cx_overlap, "ScoreBased": cx_score_based, "Selection": cx_selection}


# --- mutators (None = operator not applicable, caller retries) -----------------

def _nonempty(pb, chains) -> list[int]:
    return [v for v, c in enumerate(chains) if len(c) > 2]


def mut_clear_vehicle(pb, chains, rng):
    busy = _nonempty(pb, chains)
    if pb.n_vehicles < 2 or not busy:
        return None
    v = rng.choice(busy)
    orders = orders_on(pb, chains[v])
    out = [list(c) for c in chains]
    out[v] = pb.empty_chain(v)
    loads = loads_for(pb, out)
    rng.shuffle(orders)
    for o in orders:
        place_order(pb, out, loads, o, exclude=(v,))
    return out


def mut_swap_vehicle(pb, chains, rng):
    if pb.n_vehicles < 2 or not _nonempty(pb, chains):
        return None
    v, w = rng.sample(range(pb.n_vehicles), 2)
    if len(chains[v]) == 2 and len(chains[w]) == 2:
        busy = _nonempty(pb, chains)
        v = rng.choice(busy)
        w = rng.choice([x for x in range(pb.n_vehicles) if x != v])
    out = [list(c) for c in chains]
    out[v] = [chains[v][0], *chains[w][1:-1], chains[v][-1]]
    out[w] = [chains[w][0], *chains[v][1:-1], chains[w][-1]]
    return out


def mut_outlier(pb, chains, rng):
    """Move the order farthest (on average) from the rest of its chain."""
    if pb.n_vehicles < 2:
        return None
    dist = pb.dist
    worst = None
    for v, c in enumerate(chains):
        orders = orders_on(pb, c)
        if len(orders) < 2:
            continue
        locs = {o: order_locs(pb, o) for o in orders}
        for o in orders:
            p, d = locs[o]
            tot = sum(dist[p][q[0]] + dist[p][q[1]] + dist[d][q[0]] + dist[d][q[1]]
                      for k, q in locs.items() if k != o)
            val = tot / (len(orders) - 1)
            if worst is None or val > worst[0]:
                worst = (val, o, v)
    if worst is None:
        return None
    _, o, v = worst
    out = [list(c) for c in chains]
    out[v] = remove_orders(pb, out[v], {o})
    loads = loads_for(pb, out)
    place_order(pb, out, loads, o, exclude=(v,))
    return out


def mut_move_order(pb, chains, rng):
    """Up to three orders of one vehicle to another, repeated one to four times."""
    if pb.n_vehicles < 2 or not _nonempty(pb, chains):
        return None
    out = [list(c) for c in chains]
    for _ in range(rng.randint(1, 4)):
        busy = _nonempty(pb, out)
        v = rng.choice(busy)
        orders = orders_on(pb, out[v])
        moved = rng.sample(orders, rng.randint(1, min(3, len(orders))))
        w = rng.choice([x for x in range(pb.n_vehicles) if x != v])
        out[v] = remove_orders(pb, out[v], set(moved))
        for o in moved:
            append_order(pb, out[w], o)
    return out


def mut_close_to_other_chain(pb, chains, rng):
    """Move a random order to another chain when that chain is closer than its own."""
    if pb.n_vehicles < 2:
        return None
    where = vehicle_of(pb, chains)
    orders = [o for o in range(pb.n_orders) if where[o] >= 0]
    if not orders:
        return None
    o = rng.choice(orders)
    v = where[o]
    own = order_to_chain_distance(pb, o, chains[v], skip=o)
    best = None
    for w in range(pb.n_vehicles):
        if w == v:
            continue
        d = order_to_chain_distance(pb, o, chains[w])
        if d < own and (best is None or d < best[0]):
            best = (d, w)
    if best is None:
        return None
    out = [list(c) for c in chains]
    out[v] = remove_orders(pb, out[v], {o})
    append_order(pb, out[best[1]], o)
    return out


def _chain_len(pb, locs: Sequence[int]) -> int:
    dist = pb.dist
    return sum(dist[locs[i]][locs[i + 1]] for i in range(len(locs) - 1))


def best_insertion(pb, chain: Chain, o: int) -> tuple[int, Chain]:
    """Cheapest pickup position, then cheapest delivery position after it."""
    dist = pb.dist
    opts = pb.opts
    locs = [opts[s][k] for s, k in chain]
    p, d = order_locs(pb, o)
    best_i, best_c = 1, None
    for i in range(1, len(chain)):
        c = dist[locs[i - 1]][p] + dist[p][locs[i]] - dist[locs[i - 1]][locs[i]]
        if best_c is None or c < best_c:
            best_i, best_c = i, c
    new = chain[:best_i] + [StopVisit(2 * o, 0)] + chain[best_i:]
    nlocs = locs[:best_i] + [p] + locs[best_i:]
    best_j, best_cd = best_i + 1, None
    for j in range(best_i + 1, len(new)):
        c = dist[nlocs[j - 1]][d] + dist[d][nlocs[j]] - dist[nlocs[j - 1]][nlocs[j]]
        if best_cd is None or c < best_cd:
            best_j, best_cd = j, c
    new = new[:best_j] + [StopVisit(2 * o + 1, 0)] + new[best_j:]
    return best_c + best_cd, new


def mut_savings(pb, chains, rng):
    """Single order move with the largest distance saving, if positive."""
    if pb.n_vehicles < 2:
        return None
    opts = pb.opts
    best = None
    for v, c in enumerate(chains):
        orders = orders_on(pb, c)
        if not orders:
            continue
        base = _chain_len(pb, [opts[s][k] for s, k in c])
        for o in orders:
            rest = remove_orders(pb, c, {o})
            saved = base - _chain_len(pb, [opts[s][k] for s, k in rest])
            for w in range(pb.n_vehicles):
                if w == v or not pb.allowed(o, w):
                    continue
                cost, _ = best_insertion(pb, chains[w], o)
                gain = saved - cost
                if gain > 0 and (best is None or gain > best[0]):
                    best = (gain, o, v, w)
    if best is None:
        return None
    _, o, v, w = best
    out = [list(c) for c in chains]
    out[v] = remove_orders(pb, out[v], {o})
    out[w] = best_insertion(pb, out[w], o)[1]
    return out


_MUT = {"ClearVehicle": mut_clear_vehicle, "SwapVehicle": mut_swap_vehicle,
        "Outlier": mut_outlier, "MoveOrder": mut_move_order,
        "CloseToOtherChain": mut_close_to_other_chain, "Savings": mut_savings}


def mutate_chains(pb: Problem, chains: list[Chain], rng, kind: Optional[str] = None) -> list[Chain]:
    kinds = [kind] if kind else []
    for _ in range(MAX_RETRIES):
        k = kinds.pop() if kinds else rng.choice(VRP_MUTATORS)
        out = _MUT[k](pb, chains, rng)
        if out is not None:
            return out
    log.debug("no applicable assignment mutator after %d tries", MAX_RETRIES)
    return [list(c) for c in chains]


# --- public single-operator API ----------------------------------------------

def _candidate(pb: Problem, ind) -> Candidate:
    if isinstance(ind, Candidate):
        return ind
    chains = chains_by_index(pb, ind.solution)
    return Candidate(chains, [tour_eval(pb, v, c) for v, c in enumerate(chains)], ind.score)


def _as_solution(pb: Problem, chains: list[Chain]) -> Solution:
    return Solution({v.id: list(c) for v, c in zip(pb.inst.vehicles, chains)})


def vrp_crossover(kind: str, a, b, inst: Instance, matrix, rng) -> Solution:
    pb = get_problem(inst, matrix)
    return _as_solution(pb, _CX[kind](pb, _candidate(pb, a), _candidate(pb, b), rng))


def vrp_mutate(kind: str, ind, inst: Instance, matrix, rng, retry: bool = True) -> Optional[Solution]:
    """Apply one mutator. With ``retry`` an inapplicable operator falls back to random
    others (at most ten tries, then the input is returned); without it ``None`` is returned."""
    pb = get_problem(inst, matrix)
    chains = _candidate(pb, ind).chains
    if retry:
        return _as_solution(pb, mutate_chains(pb, chains, rng, kind))
    out = _MUT[kind](pb, chains, rng)
    return None if out is None else _as_solution(pb, out)


def initial_individual(inst: Instance, matrix, rng: random.Random,
                       tsp_params: Optional[TspParams] = None) -> Individual:
    pb = get_problem(inst, matrix)
    ev = StageEvaluator(pb, _tsp_with(tsp_params), rng.getrandbits(64))
    cand = ev.evaluate(initial_chains(pb, rng))
    return Individual(cand.solution(pb), cand.score)


def _tsp_with(params: Optional[TspParams]):
    def tsp(pb, vi, stops, rng, deadline):
        return solve_tsp_ga(pb, vi, stops, rng, deadline, params)
    return tsp


# --- the assignment GA -----------------------------------------------------------

def solve_vrp_ga(pb: Problem, params: GaParams, tsp_solver=None,
                 progress: Optional[Callable[[float, Score], None]] = None) -> tuple[Candidate, list]:
    """Returns the best candidate and the best-score trajectory ``[(elapsed, score)]``."""
    rng = random.Random(params.rng_seed)
    clock = Clock(params.max_runtime, progress)
    trajectory: list[tuple[float, Score]] = []
    ev = StageEvaluator(pb, tsp_solver or _tsp_with(params.tsp), params.rng_seed, clock.deadline)
    multi = sum(1 for o in pb.opts if len(o) > 1)
    size = params.population_size or population_formula(pb.n_orders, pb.n_vehicles,
                                                        pb.n_pd_orders, multi)

    def note(c: Candidate):
        trajectory.append((clock.elapsed(), c.score))
        clock.report(c.score, force=True)

    first = ev.evaluate(initial_chains(pb, rng))
    best = first
    note(best)
    pop = [first]
    while len(pop) < size and not clock.expired():
        crng = random.Random(rng.getrandbits(64))
        c = ev.evaluate(mutate_chains(pb, pop[crng.randrange(len(pop))].chains, crng))
        pop.append(c)
        if c.score < best.score:
            best = c
            note(best)
        clock.report(best.score)
    pop.sort(key=lambda c: c.score)

    unimproved = 0
    while unimproved < params.max_unimproved and not clock.expired() and len(pop) >= 2:
        before = best.score
        offspring = []
        while len(pop) + len(offspring) < 2 * size and not clock.expired():
            crng = random.Random(rng.getrandbits(64))
            a, b = select_parents(pop, crng.choice(SELECTIONS), crng)
            chains = _CX[crng.choice(VRP_CROSSOVERS)](pb, a, b, crng)
            if crng.random() < params.mutation_prob:
                chains = mutate_chains(pb, chains, crng)
            child = ev.evaluate(chains)
            offspring.append(child)
            if child.score < best.score:
                best = child
                note(best)
            clock.report(best.score)
        pop = sorted(pop + offspring, key=lambda c: c.score)[:size]
        if best.score < before:
            unimproved = 0
        else:
            unimproved += 1
    return best, trajectory


def run_vrp_ga(inst: Instance, matrix, params: Optional[GaParams] = None, tsp_solver=None,
               progress: Optional[Callable[[float, Score], None]] = None) -> EvaluatedSolution:
    pb = get_problem(inst, matrix)
    best, _ = solve_vrp_ga(pb, params or GaParams(), tsp_solver, progress)
    return finish(pb, best)
