"""Six-level lexicographic score ``[H1, H2, H3, S1, S2, S3]``.

Lower is better at every level and the first differing level decides.
H3..S3 are only computed once H1 and H2 are zero; otherwise they hold
``INF`` ("not evaluated"), which is worse than any real value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional, Sequence

from .model import Instance, Solution, StopVisit, pick_drivers
from .problem import Problem, get_problem
from .timeline import ScheduledTour, _schedule, chain_arrays, place

INF = math.inf
DISPLAY_DIVISOR = 10_000


class Score(NamedTuple):
    h1: float = 0
    h2: float = 0
    h3: float = 0
    s1: float = 0
    s2: float = 0
    s3: float = 0

    @property
    def feasible(self) -> bool:
        return self.h1 == 0 and self.h2 == 0 and self.h3 == 0

    def to_json(self) -> list:
        return [None if x == INF else int(x) for x in self]

    @classmethod
    def from_json(cls, data) -> "Score":
        return cls(*(INF if x is None else x for x in data))

    def display(self) -> str:
        soft = ["-" if x == INF else f"{x / DISPLAY_DIVISOR:g}" if i == 1 else f"{x:g}"
                for i, x in enumerate(self[3:])]
        hard = ["-" if x == INF else f"{x:g}" for x in self[:3]]
        return f"Hard [{', '.join(hard)}], Soft [{', '.join(soft)}]"


WORST = Score(INF, INF, INF, INF, INF, INF)


def compare(a: Sequence[float], b: Sequence[float]) -> int:
    """-1 if ``a`` is better (smaller), 1 if worse, 0 if equal."""
    for x, y in zip(a, b):
        if x < y:
            return -1
        if x > y:
            return 1
    return 0


@dataclass
class EvaluatedSolution:
    solution: Solution
    schedules: dict[str, ScheduledTour]
    score: Score


class TourEval(NamedTuple):
    """Everything one chain contributes to the score."""

    cap_excess: int
    f_pd: int
    f_se: int
    f_sr: int
    h3: int = 0
    s1: int = 0
    dist: int = 0
    secs: int = 0  # wait + drive + service
    s3: int = 0
    tw_penalty: int = 0
    timed: bool = False

    @property
    def h2(self) -> int:
        return 100 * self.f_pd + self.f_se + self.f_sr

    def key(self) -> tuple:
        """Objective of the per-vehicle sequencing stage.

        Same levels as :class:`Score` restricted to sequence-dependent terms;
        S2 kept exact as meters + 1000 * seconds.
        """
        h2 = self.h2
        if self.cap_excess or h2:
            return (self.cap_excess, h2, INF, INF, INF, INF)
        return (0, 0, self.h3, self.s1, self.dist + 1000 * self.secs, self.s3)


ZERO_TOUR = TourEval(0, 0, 0, 0, timed=True)


def capacity_excess(pb: Problem, vi: int, chain: Sequence[StopVisit]) -> int:
    """Clamped peak-load excess summed over pieces, liters and kg (trailer-aware)."""
    delta = pb.delta
    nos = pb.n_order_stops
    load = [0, 0, 0]
    # deliveries whose pickup is elsewhere start on board
    picked = {s for s, _ in chain if s < nos and not s & 1}
    for s, _ in chain:
        if s < nos and s & 1 and (s - 1) not in picked:
            d = delta[s]
            load[0] -= d[0]
            load[1] -= d[1]
            load[2] -= d[2]
    peak = list(load)
    for s, _ in chain:
        if s < nos:
            d = delta[s]
            load[0] += d[0]
            load[1] += d[1]
            load[2] += d[2]
            if load[0] > peak[0]:
                peak[0] = load[0]
            if load[1] > peak[1]:
                peak[1] = load[1]
            if load[2] > peak[2]:
                peak[2] = load[2]
    cap = pb.cap[vi]
    excess = _excess(peak, cap)
    if excess and pb.inst.vehicles[vi].trailer_allowed and pb.trailer_caps:
        best = excess
        for tc in pb.trailer_caps:
            e = _excess(peak, (cap[0] + tc[0], cap[1] + tc[1], cap[2] + tc[2]))
            if e < best:
                best = e
                if e == 0:
                    break
        excess = best
    return excess


def _excess(peak, cap) -> int:
    return max(peak[0] - cap[0], 0) + max(peak[1] - cap[1], 0) + max(peak[2] - cap[2], 0)


def sequence_faults(pb: Problem, vi: int, chain: Sequence[StopVisit]) -> tuple[int, int, int]:
    """(f_pd, f_se, f_sr) of a chain."""
    nos = pb.n_order_stops
    f_pd = 0
    seen = set()
    for s, _ in chain:
        if s < nos:
            if s & 1 and (s - 1) not in seen:
                f_pd += 1
            seen.add(s)
    opts = pb.opts
    f_se = 0
    first, last = chain[0], chain[-1]
    if opts[first.stop][first.option] not in pb.start_locs[vi]:
        f_se += 1
    if opts[last.stop][last.option] not in pb.end_locs[vi]:
        f_se += 1
    f_sr = 0
    if not pb.inst.vehicles[vi].allow_return and len(chain) > 2:
        visited = set()
        prev = None
        for s, o in chain[:-1]:
            loc = opts[s][o]
            if loc != prev:
                if loc in visited:
                    f_sr += 1
                visited.add(loc)
                prev = loc
    return f_pd, f_se, f_sr


def tour_eval(pb: Problem, vi: int, chain: Sequence[StopVisit]) -> TourEval:
    cap = capacity_excess(pb, vi, chain)
    f_pd, f_se, f_sr = sequence_faults(pb, vi, chain)
    if len(chain) <= 2:
        return TourEval(cap, f_pd, f_se, f_sr, timed=True)
    if cap or f_pd or f_se or f_sr:
        return TourEval(cap, f_pd, f_se, f_sr)
    veh = pb.inst.vehicles[vi]
    locs, legs, dsum, serv, tws, twe, split = chain_arrays(pb, vi, chain)
    w = veh.tour_start_window
    t0, run = place(w.start, w.end, legs, serv, tws, twe, split, pb.pauses, veh.can_wait,
                    veh.tour_end_limit)
    dur = run.end - t0
    h3 = max(dur - veh.max_tour_duration, 0) + max(run.end - veh.tour_end_limit, 0)
    secs = sum(run.wait) + sum(legs) + sum(serv)
    s3 = max(w.start - t0, 0) + len(set(locs[1:-1])) + len(serv)
    return TourEval(cap, f_pd, f_se, f_sr, h3, run.late + run.early, dsum, secs, s3,
                    run.late, True)


def assignment_faults(pb: Problem, orders_by_vehicle: Sequence[Sequence[int]]):
    """Sequence-independent faults: ``(f_or, f_od, f_sv, drivers)``.

    ``orders_by_vehicle[v]`` lists the order indices carried by vehicle ``v``
    in first-visit order; drivers are assigned greedily in vehicle order.
    """
    f_or = f_sv = 0
    where = [-1] * pb.n_orders
    for v, orders in enumerate(orders_by_vehicle):
        for o in orders:
            where[o] = v
            f_or += pb.compat_faults[o][v]
            rv = pb.required_vehicle[o]
            if rv is not None and rv != v:
                f_sv += 1
    f_od = 0
    for a, b in pb.colocated:
        if where[a] != where[b]:
            f_od += 1
    for a, b in pb.separated:
        if where[a] == where[b] and where[a] >= 0:
            f_od += 1
    drivers: dict[str, list[str]] = {}
    if pb.has_driver_rules:
        used: set[str] = set()
        inst = pb.inst
        for v, orders in enumerate(orders_by_vehicle):
            if not orders:
                continue
            ids, faults = pick_drivers(inst, [inst.orders[o] for o in orders], used)
            f_or += faults
            if ids:
                drivers[inst.vehicles[v].id] = ids
    return f_or, f_od, f_sv, drivers


def chain_order_list(pb: Problem, chain: Sequence[StopVisit]) -> list[int]:
    nos = pb.n_order_stops
    seen: dict[int, None] = {}
    for s, _ in chain:
        if s < nos:
            seen.setdefault(s >> 1)
    return list(seen)


def combine(pb: Problem, tours: Sequence[TourEval], f_or: int, f_od: int, f_sv: int) -> Score:
    h1 = sum(t.cap_excess for t in tours) + 100 * (f_or + f_od)
    h2 = sum(t.h2 for t in tours) + f_sv
    if h1 or h2:
        return Score(h1, h2, INF, INF, INF, INF)
    dist = sum(t.dist for t in tours)
    s2 = (dist + 500) // 1000 + sum(t.secs for t in tours)
    return Score(0, 0, sum(t.h3 for t in tours), sum(t.s1 for t in tours), s2,
                 sum(t.s3 for t in tours))


def chains_by_index(pb: Problem, solution: Solution) -> list[list[StopVisit]]:
    out = []
    for v in pb.inst.vehicles:
        chain = solution.chains.get(v.id)
        out.append(list(chain) if chain else pb.empty_chain(pb.vehicle_index[v.id]))
    return out


def score_chains(pb: Problem, chains: Sequence[Sequence[StopVisit]],
                 tours: Optional[Sequence[TourEval]] = None) -> tuple[Score, dict]:
    if tours is None:
        tours = [tour_eval(pb, vi, c) for vi, c in enumerate(chains)]
    f_or, f_od, f_sv, drivers = assignment_faults(pb, [chain_order_list(pb, c) for c in chains])
    return combine(pb, tours, f_or, f_od, f_sv), drivers


def evaluate_solution(pb: Problem, solution: Solution) -> EvaluatedSolution:
    """Schedule every used chain as given and score the whole solution."""
    chains = chains_by_index(pb, solution)
    score, drivers = score_chains(pb, chains)
    schedules = {}
    for vi, c in enumerate(chains):
        if len(c) > 2:
            schedules[pb.inst.vehicles[vi].id] = _schedule(pb, vi, c)
    sol = Solution({pb.inst.vehicles[vi].id: list(c) for vi, c in enumerate(chains)}, drivers)
    return EvaluatedSolution(sol, schedules, score)


# --- per-level functions over explicit schedules ---------------------------

def _pb(inst: Instance) -> Problem:
    return get_problem(inst, None)


def eval_h1(inst: Instance, solution: Solution) -> int:
    pb = _pb(inst)
    chains = chains_by_index(pb, solution)
    cap = sum(capacity_excess(pb, vi, c) for vi, c in enumerate(chains))
    f_or, f_od, _, _ = assignment_faults(pb, [chain_order_list(pb, c) for c in chains])
    return cap + 100 * (f_or + f_od)


def eval_h2(inst: Instance, solution: Solution) -> int:
    pb = _pb(inst)
    chains = chains_by_index(pb, solution)
    total = 0
    for vi, c in enumerate(chains):
        f_pd, f_se, f_sr = sequence_faults(pb, vi, c)
        total += 100 * f_pd + f_se + f_sr
    _, _, f_sv, _ = assignment_faults(pb, [chain_order_list(pb, c) for c in chains])
    return total + f_sv


def _vehicle(inst: Instance, vid: str):
    return next(v for v in inst.vehicles if v.id == vid)


def eval_h3(inst: Instance, schedules: Mapping[str, ScheduledTour]) -> int:
    total = 0
    for vid, t in schedules.items():
        v = _vehicle(inst, vid)
        total += max(t.duration - v.max_tour_duration, 0) + max(t.end_time - v.tour_end_limit, 0)
    return total


def eval_s1(inst: Instance, schedules: Mapping[str, ScheduledTour]) -> int:
    return sum(t.tw_penalty + t.early_penalty for t in schedules.values())


def eval_s2(inst: Instance, schedules: Mapping[str, ScheduledTour]) -> int:
    dist = sum(t.total_dist for t in schedules.values())
    secs = sum(t.total_wait + t.total_drive + t.total_service for t in schedules.values())
    return (dist + 500) // 1000 + secs


def eval_s3(inst: Instance, schedules: Mapping[str, ScheduledTour]) -> int:
    total = 0
    for vid, t in schedules.items():
        v = _vehicle(inst, vid)
        total += max(v.tour_start_window.start - t.start_time, 0)
        total += t.distinct_locations + t.chain_length
    return total


def evaluate(inst: Instance, solution: Solution, schedules: Mapping[str, ScheduledTour]) -> Score:
    h1 = eval_h1(inst, solution)
    h2 = eval_h2(inst, solution)
    if h1 or h2:
        return Score(h1, h2, INF, INF, INF, INF)
    return Score(h1, h2, eval_h3(inst, schedules), eval_s1(inst, schedules),
                 eval_s2(inst, schedules), eval_s3(inst, schedules))
