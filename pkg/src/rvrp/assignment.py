"""Assignment helpers shared by the population-based solvers.

A solver state is a list of chains indexed by vehicle position. Orders move
between vehicles as pickup/delivery pairs; per-vehicle sequencing is left to
a nested solver whose results are memoized per (vehicle, stop set).
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .model import Solution, StopVisit
from .problem import Problem
from .score import (EvaluatedSolution, Score, TourEval, combine, assignment_faults,
                    chain_order_list, tour_eval, evaluate_solution)

Chain = list[StopVisit]
TspSolver = Callable[..., Chain]


def orders_on(pb: Problem, chain: Sequence[StopVisit]) -> list[int]:
    return chain_order_list(pb, chain)


def vehicle_of(pb: Problem, chains: Sequence[Chain]) -> list[int]:
    where = [-1] * pb.n_orders
    nos = pb.n_order_stops
    for v, c in enumerate(chains):
        for s, _ in c:
            if s < nos:
                where[s >> 1] = v
    return where


def order_locs(pb: Problem, o: int) -> tuple[int, int]:
    return pb.opts[2 * o][0], pb.opts[2 * o + 1][0]


def chain_locs(pb: Problem, chain: Sequence[StopVisit]) -> list[int]:
    opts = pb.opts
    return [opts[s][k] for s, k in chain]


def order_to_chain_distance(pb: Problem, o: int, chain: Sequence[StopVisit], skip: int = -1) -> int:
    """Sum over the order's two stops of the distance to the nearest stop on ``chain``.

    TourEnd is ignored; TourBegin counts so empty vehicles are measured from
    their start location. Stops of order ``skip`` are ignored.
    """
    dist = pb.dist
    p, d = order_locs(pb, o)
    rp, rd = dist[p], dist[d]
    bp = bd = 1 << 60
    nos = pb.n_order_stops
    opts = pb.opts
    for s, k in chain[:-1]:
        if s < nos and (s >> 1) == skip:
            continue
        loc = opts[s][k]
        if rp[loc] < bp:
            bp = rp[loc]
        if rd[loc] < bd:
            bd = rd[loc]
    return bp + bd


def load_of(pb: Problem, orders: Sequence[int]) -> list[int]:
    tot = [0, 0, 0]
    dem = pb.demand
    for o in orders:
        d = dem[o]
        tot[0] += d[0]
        tot[1] += d[1]
        tot[2] += d[2]
    return tot


def fits(pb: Problem, v: int, load: Sequence[int], o: int) -> bool:
    cap = pb.cap[v]
    d = pb.demand[o]
    return load[0] + d[0] <= cap[0] and load[1] + d[1] <= cap[1] and load[2] + d[2] <= cap[2]


def free_ratio(pb: Problem, v: int, load: Sequence[int]) -> float:
    cap = pb.cap[v]
    r = 1.0
    for c, l in zip(cap, load):
        if c > 0:
            r = min(r, max(c - l, 0) / c)
    return r


def append_order(pb: Problem, chain: Chain, o: int) -> None:
    """Append pickup then delivery just before TourEnd."""
    last = pb.opts[chain[-2].stop][chain[-2].option]
    p = 2 * o
    popt = pb.nearest_option(p, last) if pb.dist is not None else 0
    chain[-1:-1] = [StopVisit(p, popt), StopVisit(p + 1, 0)]


def remove_orders(pb: Problem, chain: Chain, orders) -> Chain:
    nos = pb.n_order_stops
    return [sv for sv in chain if sv.stop >= nos or (sv.stop >> 1) not in orders]


def place_order(pb: Problem, chains: list[Chain], loads: list[list[int]], o: int,
                exclude: Sequence[int] = ()) -> int:
    """Put order ``o`` on the nearest vehicle with room (compatible ones first)."""
    cands = [v for v in range(pb.n_vehicles) if v not in exclude] or list(range(pb.n_vehicles))
    tiers = (
        [v for v in cands if pb.allowed(o, v) and fits(pb, v, loads[v], o)],
        [v for v in cands if pb.allowed(o, v)],
        [v for v in cands if fits(pb, v, loads[v], o)],
        cands,
    )
    pool = next(t for t in tiers if t)
    best = min(pool, key=lambda v: order_to_chain_distance(pb, o, chains[v]))
    append_order(pb, chains[best], o)
    d = pb.demand[o]
    ld = loads[best]
    ld[0] += d[0]
    ld[1] += d[1]
    ld[2] += d[2]
    return best


def loads_for(pb: Problem, chains: Sequence[Chain]) -> list[list[int]]:
    return [load_of(pb, orders_on(pb, c)) for c in chains]


def is_constrained(pb: Problem, o: int) -> bool:
    order = pb.inst.orders[o]
    return (pb.required_vehicle[o] is not None or any(pb.compat_faults[o])
            or bool(order.colocated_with) or bool(order.not_colocated_with))


def initial_chains(pb: Problem, rng: random.Random) -> list[Chain]:
    """Constructive assignment: constrained orders first, then nearest-stop growth,
    then one pass moving orders to vehicles with a lower mean stop distance."""
    nv = pb.n_vehicles
    chains = [pb.empty_chain(v) for v in range(nv)]
    loads = [[0, 0, 0] for _ in range(nv)]
    done = [False] * pb.n_orders
    constrained = [o for o in range(pb.n_orders) if is_constrained(pb, o)]
    for o in constrained:
        if done[o]:
            continue
        v = place_order(pb, chains, loads, o)
        done[o] = True
        # pull co-located partners along when they are allowed there
        for ref in pb.inst.orders[o].colocated_with:
            j = pb.order_index.get(ref)
            if j is not None and not done[j]:
                append_order(pb, chains[v], j)
                for i, x in enumerate(pb.demand[j]):
                    loads[v][i] += x
                done[j] = True

    # nearest remaining (order, vehicle) pair with room, Prim style
    rest = [o for o in range(pb.n_orders) if not done[o]]
    dist = pb.dist
    near_p: dict[int, list[int]] = {}
    near_d: dict[int, list[int]] = {}
    for o in rest:
        p, d = order_locs(pb, o)
        near_p[o] = [min(dist[p][l] for l in chain_locs(pb, chains[v][:-1])) for v in range(nv)]
        near_d[o] = [min(dist[d][l] for l in chain_locs(pb, chains[v][:-1])) for v in range(nv)]
    while rest:
        pick = None
        for o in rest:
            rp, rd = near_p[o], near_d[o]
            for v in range(nv):
                c = rp[v] + rd[v]
                if (pick is None or c < pick[0]) and pb.allowed(o, v) and fits(pb, v, loads[v], o):
                    pick = (c, o, v)
        if pick is None:
            for o in rest:
                place_order(pb, chains, loads, o)
            break
        _, o, v = pick
        append_order(pb, chains[v], o)
        for i, x in enumerate(pb.demand[o]):
            loads[v][i] += x
        rest.remove(o)
        p, d = order_locs(pb, o)
        for q in rest:
            qp, qd = order_locs(pb, q)
            near_p[q][v] = min(near_p[q][v], dist[qp][p], dist[qp][d])
            near_d[q][v] = min(near_d[q][v], dist[qd][p], dist[qd][d])

    _improve_mean_distance(pb, chains, loads)
    return chains


def _mean_delivery_distance(pb: Problem, o: int, chain: Sequence[StopVisit]) -> float:
    others = [q for q in orders_on(pb, chain) if q != o]
    if not others:
        return float(order_to_chain_distance(pb, o, chain))
    d = pb.dist[pb.opts[2 * o + 1][0]]
    return sum(d[pb.opts[2 * q + 1][0]] for q in others) / len(others)


def _improve_mean_distance(pb: Problem, chains: list[Chain], loads: list[list[int]]) -> None:
    where = vehicle_of(pb, chains)
    for o in range(pb.n_orders):
        v = where[o]
        if is_constrained(pb, o):
            continue
        here = _mean_delivery_distance(pb, o, chains[v])
        best_v, best_d = v, here
        for w in range(pb.n_vehicles):
            if w == v or not pb.allowed(o, w) or not fits(pb, w, loads[w], o):
                continue
            if not orders_on(pb, chains[w]):
                continue
            d = _mean_delivery_distance(pb, o, chains[w])
            if d < best_d:
                best_v, best_d = w, d
        if best_v != v:
            chains[v] = remove_orders(pb, chains[v], {o})
            append_order(pb, chains[best_v], o)
            for i, x in enumerate(pb.demand[o]):
                loads[v][i] -= x
                loads[best_v][i] += x
            where[o] = best_v


@dataclass
class Candidate:
    """A scored state of the solver: chains per vehicle index."""

    chains: list[Chain]
    tours: list[TourEval]
    score: Score
    drivers: dict = field(default_factory=dict)

    def solution(self, pb: Problem) -> Solution:
        return Solution({v.id: list(c) for v, c in zip(pb.inst.vehicles, self.chains)},
                        {k: list(x) for k, x in self.drivers.items()})

    def signature(self) -> tuple:
        return tuple(tuple(c) for c in self.chains)


class StageEvaluator:
    """Runs the nested sequencing stage (memoized) and scores assignments."""

    def __init__(self, pb: Problem, tsp: TspSolver, seed: int, deadline: float = float("inf")):
        self.pb = pb
        self.tsp = tsp
        self.seed = seed
        self.deadline = deadline
        self.memo: dict[tuple[int, frozenset], tuple[Chain, TourEval]] = {}
        self.solves = 0

    def vehicle(self, v: int, stops: Sequence[int]) -> tuple[Chain, TourEval]:
        key = (v, frozenset(stops))
        hit = self.memo.get(key)
        if hit is None:
            ordered = sorted(key[1])
            if not ordered:
                chain = self.pb.empty_chain(v)
            else:
                rng = random.Random(f"{self.seed}:{v}:{ordered}")
                chain = self.tsp(self.pb, v, ordered, rng, self.deadline)
                self.solves += 1
            hit = (chain, tour_eval(self.pb, v, chain))
            self.memo[key] = hit
        return hit

    def evaluate(self, chains: Sequence[Chain]) -> Candidate:
        pb = self.pb
        nos = pb.n_order_stops
        new_chains = []
        tours = []
        for v, c in enumerate(chains):
            chain, te = self.vehicle(v, [s for s, _ in c if s < nos])
            new_chains.append(list(chain))
            tours.append(te)
        return self.score(new_chains, tours)

    def score(self, chains: list[Chain], tours: list[TourEval]) -> Candidate:
        pb = self.pb
        f_or, f_od, f_sv, drivers = assignment_faults(pb, [orders_on(pb, c) for c in chains])
        return Candidate(chains, tours, combine(pb, tours, f_or, f_od, f_sv), drivers)


def finish(pb: Problem, cand: Candidate) -> EvaluatedSolution:
    return evaluate_solution(pb, cand.solution(pb))


class Clock:
    """Wall-clock budget plus throttled progress reporting."""

    def __init__(self, max_runtime: float, progress: Optional[Callable] = None, every: float = 0.5):
        self.t0 = time.monotonic()
        self.deadline = self.t0 + max_runtime
        self.progress = progress
        self.every = every
        self.last = -1e9

    def elapsed(self) -> float:
        return time.monotonic() - self.t0

    def expired(self) -> bool:
        return time.monotonic() >= self.deadline

    def report(self, score: Score, force: bool = False) -> None:
        if self.progress is None:
            return
        now = time.monotonic()
        if force or now - self.last >= self.every:
            self.last = now
            self.progress(now - self.t0, score)
