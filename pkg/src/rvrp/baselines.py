"""Reference solvers: exhaustive search, a savings constructor and tabu search."""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

from .assignment import (Candidate, Chain, Clock, StageEvaluator, finish, load_of, orders_on,
                         remove_orders)
from .ga.vrp import best_insertion
from .model import Instance, Solution, StopVisit
from .problem import Problem, get_problem
from .score import (EvaluatedSolution, Score, TourEval, assignment_faults, chains_by_index, combine,
                    tour_eval)

TSP_GUARD = 9  # inner stops
VRP_GUARD_ORDERS = 4
VRP_GUARD_VEHICLES = 3


class GuardError(ValueError):
    """Instance too large for exhaustive search (override with ``allow_huge``)."""


class BudgetExceeded(RuntimeError):
    """Time budget ran out; ``best`` holds the best result found so far."""

    def __init__(self, msg: str, best):
        super().__init__(msg)
        self.best = best


# --- exhaustive sequencing ------------------------------------------------------------

def precedence_orders(pb: Problem, stops: Sequence[int]) -> Iterator[list[int]]:
    """All orderings of ``stops`` with every pickup before its delivery (lexicographic)."""
    nos = pb.n_order_stops
    stops = sorted(stops)
    members = set(stops)
    n = len(stops)
    used = set()
    out: list[int] = []

    def rec():
        if len(out) == n:
            yield list(out)
            return
        for s in stops:
            if s in used:
                continue
            if s < nos and s & 1 and (s - 1) in members and (s - 1) not in used:
                continue
            used.add(s)
            out.append(s)
            yield from rec()
            out.pop()
            used.discard(s)

    yield from rec()


def _option_sets(pb: Problem, vi: int, perm: Sequence[int]):
    seq = [pb.begin_stop[vi], *perm, pb.end_stop[vi]]
    ranges = [range(len(pb.opts[s])) for s in seq]
    for combo in itertools.product(*ranges):
        yield [StopVisit(s, o) for s, o in zip(seq, combo)]


def _bf_tsp(pb: Problem, vi: int, stops: Sequence[int], deadline: float,
            allow_huge: bool = False) -> tuple[Chain, TourEval]:
    if len(stops) > TSP_GUARD and not allow_huge:
        raise GuardError(f"{len(stops)} inner stops exceed the exhaustive-search guard of {TSP_GUARD}")
    best: Optional[tuple[tuple, Chain]] = None
    count = 0
    for perm in precedence_orders(pb, stops):
        for chain in _option_sets(pb, vi, perm):
            k = tour_eval(pb, vi, chain).key()
            if best is None or k < best[0]:
                best = (k, chain)
            count += 1
            if count & 255 == 0 and time.monotonic() > deadline:
                raise BudgetExceeded("brute-force sequencing budget exceeded",
                                     (best[1], tour_eval(pb, vi, best[1])))
    if best is None:
        chain = pb.empty_chain(vi)
        return chain, tour_eval(pb, vi, chain)
    return best[1], tour_eval(pb, vi, best[1])


def brute_force_tsp(inst: Instance, matrix, vehicle: str, stops: Sequence, budget: float = 60.0,
                    allow_huge: bool = False) -> tuple[list[StopVisit], tuple]:
    """Exact best chain for ``stops`` (indices or stop ids) on ``vehicle``.

    Returns ``(chain, key)`` where ``key`` is the per-vehicle score vector
    (S2 in meters + 1000 * seconds so it stays exact).
    """
    pb = get_problem(inst, matrix)
    ids = {s.id: i for i, s in enumerate(pb.stops)}
    idx = [ids[s] if isinstance(s, str) else int(s) for s in stops]
    chain, te = _bf_tsp(pb, pb.vehicle_index[vehicle], idx, time.monotonic() + budget, allow_huge)
    return chain, te.key()


def brute_force_vrp(inst: Instance, matrix, budget: float = 600.0,
                    allow_huge: bool = False) -> EvaluatedSolution:
    pb = get_problem(inst, matrix)
    if not allow_huge and (pb.n_orders > VRP_GUARD_ORDERS or pb.n_vehicles > VRP_GUARD_VEHICLES):
        raise GuardError(f"{pb.n_orders} orders / {pb.n_vehicles} vehicles exceed the exhaustive-search "
                         f"guard of {VRP_GUARD_ORDERS} / {VRP_GUARD_VEHICLES}")
    deadline = time.monotonic() + budget

    def tsp(pb_, vi, stops, rng, dl):
        return _bf_tsp(pb_, vi, stops, deadline, allow_huge)[0]

    ev = StageEvaluator(pb, tsp, 0, deadline)
    best: Optional[Candidate] = None
    try:
        for assign in itertools.product(range(pb.n_vehicles), repeat=pb.n_orders):
            chains = [pb.empty_chain(v) for v in range(pb.n_vehicles)]
            for o, v in enumerate(assign):
                chains[v][-1:-1] = [StopVisit(2 * o, 0), StopVisit(2 * o + 1, 0)]
            cand = ev.evaluate(chains)
            if best is None or cand.score < best.score:
                best = cand
            if time.monotonic() > deadline:
                raise BudgetExceeded("brute-force budget exceeded", finish(pb, best))
    except BudgetExceeded as exc:
        if not isinstance(exc.best, EvaluatedSolution):  # ran out inside the sequencing stage
            raise BudgetExceeded(str(exc), None if best is None else finish(pb, best)) from None
        raise
    return finish(pb, best)


# --- savings construction -----------------------------------------------------------

def savings_construct(inst: Instance, matrix) -> Solution:
    """Pairwise route merging by distance saving, then first-fit-decreasing onto vehicles."""
    pb = get_problem(inst, matrix)
    return _savings(pb)


def _savings(pb: Problem) -> Solution:
    dist = pb.dist
    hub = pb.opts[pb.begin_stop[0]][0] if pb.n_vehicles else 0
    max_cap = [max(c[i] for c in pb.cap) for i in range(3)] if pb.n_vehicles else [0, 0, 0]
    routes: dict[int, list[int]] = {o: [o] for o in range(pb.n_orders)}  # route id -> orders
    head = {o: o for o in range(pb.n_orders)}  # order at route start -> route id
    tail = {o: o for o in range(pb.n_orders)}
    route_of = {o: o for o in range(pb.n_orders)}

    # orders loaded at the hub behave like plain CVRP customers: pickups move to the route start
    at_hub = [pb.opts[2 * o][0] == hub for o in range(pb.n_orders)]

    def first_loc(o):
        return pb.opts[2 * o + 1][0] if at_hub[o] else pb.opts[2 * o][0]

    def last_loc(o):
        return pb.opts[2 * o + 1][0]

    pairs = []
    for i in range(pb.n_orders):
        for j in range(pb.n_orders):
            if i != j:
                a, b = last_loc(i), first_loc(j)
                s = dist[a][hub] + dist[hub][b] - dist[a][b]
                if s > 0:
                    pairs.append((-s, i, j))
    pairs.sort()
    for _, i, j in pairs:
        ri, rj = route_of[i], route_of[j]
        if ri == rj or tail.get(ri) != i or head.get(rj) != j:
            continue
        merged = routes[ri] + routes[rj]
        load = load_of(pb, merged)
        if any(l > c for l, c in zip(load, max_cap)):
            continue
        routes[ri] = merged
        del routes[rj]
        tail[ri] = tail.pop(rj)
        head.pop(rj)
        for o in routes[ri]:
            route_of[o] = ri

    chains = [pb.empty_chain(v) for v in range(pb.n_vehicles)]
    loads = [[0, 0, 0] for _ in range(pb.n_vehicles)]
    ordered = sorted(routes.values(), key=lambda r: (-load_of(pb, r)[2], r[0]))
    for r in ordered:
        rl = load_of(pb, r)
        target = None
        for v in range(pb.n_vehicles):
            if all(loads[v][k] + rl[k] <= pb.cap[v][k] for k in range(3)) and all(
                    pb.allowed(o, v) for o in r):
                target = v
                break
        if target is None:
            target = max(range(pb.n_vehicles),
                         key=lambda v: (pb.cap[v][2] - loads[v][2], -v))
        visits = [StopVisit(2 * o, 0) for o in r if at_hub[o]]
        for o in r:
            visits += [StopVisit(2 * o + 1, 0)] if at_hub[o] else [StopVisit(2 * o, 0), StopVisit(2 * o + 1, 0)]
        chains[target][-1:-1] = visits
        for k in range(3):
            loads[target][k] += rl[k]
    return Solution({v.id: c for v, c in zip(pb.inst.vehicles, chains)})


# --- tabu search -------------------------------------------------------------------------

@dataclass
class TabuParams:
    tabu_tenure: int = 10
    max_unimproved: int = 500
    max_runtime: float = 300.0
    rng_seed: int = 0
    max_neighbors: int = 200


def _neighbors(pb: Problem, chains: list[Chain]):
    """Move descriptors: relocations, intra-chain moves/swaps and option changes."""
    moves = []
    nv = pb.n_vehicles
    for v, c in enumerate(chains):
        for o in orders_on(pb, c):
            for w in range(nv):
                if w != v:
                    moves.append(("relocate", o, v, w))
        n = len(c) - 2
        for i in range(1, n + 1):
            for k in range(1, n + 1):
                if k != i:
                    moves.append(("move", v, i, k))
            for j in range(i + 1, n + 1):
                moves.append(("swap", v, i, j))
        for i, sv in enumerate(c):
            for x in range(len(pb.opts[sv.stop])):
                if x != sv.option:
                    moves.append(("option", v, i, x))
    return moves


def _valid(pb: Problem, chain: Chain) -> bool:
    nos = pb.n_order_stops
    seen = set()
    for s, _ in chain:
        if s < nos and s & 1 and (s - 1) not in seen:
            return False
        seen.add(s)
    return True


def _apply(pb: Problem, chains: list[Chain], mv) -> Optional[tuple[list[Chain], tuple, list[int]]]:
    kind = mv[0]
    out = list(chains)
    if kind == "relocate":
        _, o, v, w = mv
        out[v] = remove_orders(pb, chains[v], {o})
        out[w] = best_insertion(pb, chains[w], o)[1]
        return out, ("order", o, v), [v, w]
    _, v, i, x = mv
    c = list(chains[v])
    if kind == "move":
        sv = c.pop(i)
        c.insert(x, sv)
        attr = ("stop", sv.stop)
    elif kind == "swap":
        c[i], c[x] = c[x], c[i]
        attr = ("stop", c[i].stop)
    else:
        c[i] = StopVisit(c[i].stop, x)
        attr = ("option", c[i].stop)
    if not _valid(pb, c):
        return None
    out[v] = c
    return out, attr, [v]


def solve_tabu(pb: Problem, start: list[Chain], params: TabuParams,
               progress: Optional[Callable[[float, Score], None]] = None):
    rng = random.Random(params.rng_seed)
    clock = Clock(params.max_runtime, progress)
    cache: dict[tuple, TourEval] = {}

    def te(v, c):
        k = (v, tuple(c))
        r = cache.get(k)
        if r is None:
            r = tour_eval(pb, v, c)
            cache[k] = r
        return r

    def score(chains, tours):
        f_or, f_od, f_sv, drivers = assignment_faults(pb, [orders_on(pb, c) for c in chains])
        return combine(pb, tours, f_or, f_od, f_sv), drivers

    cur = [list(c) for c in start]
    cur_tours = [te(v, c) for v, c in enumerate(cur)]
    cur_score, drv = score(cur, cur_tours)
    best = Candidate(cur, list(cur_tours), cur_score, drv)
    trajectory = [(clock.elapsed(), best.score)]
    clock.report(best.score, force=True)
    tabu: dict[tuple, int] = {}
    it = unimproved = 0
    while unimproved < params.max_unimproved and not clock.expired():
        it += 1
        moves = _neighbors(pb, cur)
        if len(moves) > params.max_neighbors:
            moves = rng.sample(moves, params.max_neighbors)
        chosen = None
        for mv in moves:
            res = _apply(pb, cur, mv)
            if res is None:
                continue
            chains, attr, touched = res
            tours = list(cur_tours)
            for v in touched:
                tours[v] = te(v, chains[v])
            sc, d = score(chains, tours)
            is_tabu = tabu.get(attr, 0) >= it
            if is_tabu and not sc < best.score:
                continue
            if chosen is None or sc < chosen[0]:
                chosen = (sc, chains, tours, d, attr, mv)
        if chosen is None:
            unimproved += 1
            continue
        sc, cur, cur_tours, d, attr, mv = chosen
        # forbid undoing the move for a while
        if mv[0] == "relocate":
            tabu[("order", mv[1], mv[2])] = it + params.tabu_tenure
        else:
            tabu[attr] = it + params.tabu_tenure
        if sc < best.score:
            best = Candidate([list(c) for c in cur], list(cur_tours), sc, d)
            trajectory.append((clock.elapsed(), sc))
            clock.report(sc, force=True)
            unimproved = 0
        else:
            unimproved += 1
            clock.report(best.score)
    return best, trajectory


def tabu_search(inst: Instance, matrix, start: Solution, params: Optional[TabuParams] = None,
                progress: Optional[Callable[[float, Score], None]] = None) -> EvaluatedSolution:
    pb = get_problem(inst, matrix)
    best, _ = solve_tabu(pb, chains_by_index(pb, start), params or TabuParams(), progress)
    return finish(pb, best)


def random_start(inst: Instance, matrix, rng: random.Random) -> Solution:
    """Uniform random vehicle per order, each chain in pickup-delivery-pair order."""
    pb = get_problem(inst, matrix)
    chains = [pb.empty_chain(v) for v in range(pb.n_vehicles)]
    for o in range(pb.n_orders):
        v = rng.randrange(pb.n_vehicles)
        chains[v][-1:-1] = [StopVisit(2 * o, 0), StopVisit(2 * o + 1, 0)]
    return Solution({v.id: c for v, c in zip(pb.inst.vehicles, chains)})
