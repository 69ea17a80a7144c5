"""Two-stage ant colony optimization.

Assignment stage: pheromones on vehicle-stop and stop-stop pairs; an ant
walks from order to order and puts each pickup/delivery pair on a vehicle by
roulette. Sequencing stage: one stop-stop matrix whose diagonal holds the
attractiveness of a stop as the first visit.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .assignment import Candidate, Chain, Clock, StageEvaluator, finish, fits, free_ratio
from .model import Instance, Solution, StopVisit
from .problem import Problem, get_problem
from .score import INF, EvaluatedSolution, Score, tour_eval

EPS = 1e-6
LEVELS = 6


@dataclass
class AcoParams:
    evaporation: float = 0.05  # decay factor applied when evaporation triggers
    evaporation_prob: float = 0.05  # chance per iteration that it triggers
    best_set_size: int = 10
    max_unimproved: int = 500
    max_runtime: float = 300.0
    novelty_fraction: float = 0.1
    rng_seed: int = 0
    # sequencing stage
    tsp_max_unimproved: int = 500
    tsp_convergence: int = 10
    beta: float = 1.0
    # initial sequencing pheromone = tsp_scale / (1 + d_km); acts as an inverse learning rate
    tsp_scale: float = 1000.0

    def __post_init__(self):
        if not 0.0 < self.evaporation < 1.0:
            raise ValueError("evaporation must lie in (0, 1)")
        if self.best_set_size < 1:
            raise ValueError("best_set_size must be >= 1")


@dataclass
class PheromoneState:
    vehicle_stop: list[list[float]]
    stop_stop: list[list[float]]
    best_set: list = field(default_factory=list)
    worst_ever: list[float] = field(default_factory=lambda: [-INF] * LEVELS)
    best_ever: list[float] = field(default_factory=lambda: [INF] * LEVELS)
    capacity: int = 10

    def floor(self) -> None:
        for m in (self.vehicle_stop, self.stop_stop):
            for row in m:
                for j, x in enumerate(row):
                    if x < EPS:
                        row[j] = EPS

    def observe(self, score: Sequence[float]) -> None:
        """Track per-level extremes over every scored solution."""
        for i, x in enumerate(score):
            if x == INF:
                continue
            if x > self.worst_ever[i]:
                self.worst_ever[i] = x
            if x < self.best_ever[i]:
                self.best_ever[i] = x

    def offer(self, cand) -> bool:
        """Insert into the bounded best set if there is room or it beats the worst member."""
        if any(c.signature() == cand.signature() for c in self.best_set):
            return False
        if len(self.best_set) >= self.capacity and not cand.score < self.best_set[-1].score:
            return False
        self.best_set.append(cand)
        self.best_set.sort(key=lambda c: c.score)
        del self.best_set[self.capacity:]
        return True


def km(meters: float) -> float:
    return meters / 1000.0


def init_pheromones(inst: Instance, matrix, capacity: int = 10) -> PheromoneState:
    pb = get_problem(inst, matrix)
    return _init(pb, capacity)


def _init(pb: Problem, capacity: int = 10) -> PheromoneState:
    n = pb.n_order_stops
    locs = [pb.opts[s][0] for s in range(n)]
    dist = pb.dist
    ss = [[max(1.0 / (1.0 + km(dist[locs[i]][locs[j]])), EPS) for j in range(n)] for i in range(n)]
    vs = [[1.0] * n for _ in range(pb.n_vehicles)]
    return PheromoneState(vs, ss, capacity=capacity)


def score_factor(ws: float, bs: float, s: float) -> float:
    """``|(ws - s)^3 / (ws - bs)^3|``; 1.0 when the level has collapsed (ws == bs)."""
    if ws == bs:
        return 1.0
    return abs((ws - s) ** 3 / (ws - bs) ** 3)


def deposit_amount(factors: Sequence[float], bases: Sequence[float]) -> float:
    """``sum_i f_i * p_i / i`` over the six levels (i starting at 1)."""
    return math.fsum(f * p / (i + 1) for i, (f, p) in enumerate(zip(factors, bases)))


def level_terms(score: Sequence[float], worst: Sequence[float], best: Sequence[float],
                worst_ever: Sequence[float]) -> tuple[list[float], list[float]]:
    """Factors and bases per level; not-evaluated levels contribute nothing."""
    fs, ps = [], []
    for i, s in enumerate(score):
        if s == INF or worst[i] in (INF, -INF) or best[i] == INF:
            fs.append(0.0)
            ps.append(0.0)
            continue
        fs.append(score_factor(worst[i], best[i], s))
        ps.append(1.0 if (worst_ever[i] == -INF or s < worst_ever[i]) else 0.25)
    return fs, ps


def _deposit(pb: Problem, state: PheromoneState, chains: Sequence[Chain], score) -> float:
    fs, ps = level_terms(score, state.worst_ever, state.best_ever, state.worst_ever)
    amount = deposit_amount(fs, ps)
    if amount <= 0:
        return 0.0
    nos = pb.n_order_stops
    vs, ss = state.vehicle_stop, state.stop_stop
    for v, c in enumerate(chains):
        inner = [s for s, _ in c if s < nos]
        for s in inner:
            vs[v][s] += amount
        for a, b in zip(inner, inner[1:]):
            ss[a][b] += amount
            ss[b][a] += amount
    return amount


def deposit(state: PheromoneState, solution: EvaluatedSolution, inst: Instance, matrix) -> float:
    """Add the score-weighted amount to every pair the solution uses; returns the amount."""
    pb = get_problem(inst, matrix)
    chains = [solution.solution.chains.get(v.id, pb.empty_chain(i))
              for i, v in enumerate(inst.vehicles)]
    return _deposit(pb, state, chains, solution.score)


def evaporate(state: PheromoneState, rng: random.Random, params: Optional[AcoParams] = None) -> bool:
    params = params or AcoParams()
    if rng.random() >= params.evaporation_prob:
        return False
    keep = 1.0 - params.evaporation
    for m in (state.vehicle_stop, state.stop_stop):
        for row in m:
            for j in range(len(row)):
                x = row[j] * keep
                row[j] = x if x > EPS else EPS
    return True


def _roulette(weights: Sequence[float], rng: random.Random) -> int:
    total = math.fsum(weights)
    r = rng.random() * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if r < acc:
            return i
    return len(weights) - 1


def _construct(pb: Problem, state: PheromoneState, rng: random.Random, probabilistic: bool) -> list[Chain]:
    nv = pb.n_vehicles
    chains = [pb.empty_chain(v) for v in range(nv)]
    loads = [[0, 0, 0] for _ in range(nv)]
    on_vehicle: list[list[int]] = [[] for _ in range(nv)]
    ratio = [1.0] * nv
    ss, vs = state.stop_stop, state.vehicle_stop
    pending = list(range(pb.n_orders))
    cur = None
    while pending:
        if cur is None:
            o = pending[rng.randrange(len(pending))]
        elif probabilistic:
            o = pending[_roulette([ss[cur][2 * q] for q in pending], rng)]
        else:
            row = ss[cur]
            o = max(pending, key=lambda q: (row[2 * q], -q))
        pending.remove(o)
        p = 2 * o
        cands = [v for v in range(nv) if ratio[v] > 0 and fits(pb, v, loads[v], o) and pb.allowed(o, v)]
        if not cands:
            cands = [v for v in range(nv) if ratio[v] > 0 and fits(pb, v, loads[v], o)]
        if not cands:
            v = max(range(nv), key=lambda x: (ratio[x], -x))
        else:
            weights = []
            for v in cands:
                w = vs[v][p] * ratio[v]
                row = ss[p]
                for s in on_vehicle[v]:
                    w += row[s]
                weights.append(w)
            v = cands[_roulette(weights, rng)]
        chains[v][-1:-1] = [StopVisit(p, 0), StopVisit(p + 1, 0)]
        on_vehicle[v] += [p, p + 1]
        for k in range(3):
            loads[v][k] += pb.demand[o][k]
        ratio[v] = free_ratio(pb, v, loads[v])
        cur = p + 1
    return chains


def construct_assignment(inst: Instance, matrix, state: PheromoneState, rng: random.Random,
                         probabilistic: bool = False) -> Solution:
    pb = get_problem(inst, matrix)
    chains = _construct(pb, state, rng, probabilistic)
    return Solution({v.id: c for v, c in zip(inst.vehicles, chains)})


# --- sequencing stage ---------------------------------------------------------------

def solve_tsp_aco(pb: Problem, vi: int, stops: Sequence[int], rng: random.Random,
                  deadline: float = math.inf, params: Optional[AcoParams] = None) -> Chain:
    params = params or AcoParams()
    stops = sorted(stops)
    n = len(stops)
    begin, end = pb.begin_stop[vi], pb.end_stop[vi]
    if n == 0:
        return pb.empty_chain(vi)
    nos = pb.n_order_stops
    dist = pb.dist
    locs = [pb.opts[s][0] for s in stops]
    bloc = pb.opts[begin][0]
    local = {s: i for i, s in enumerate(stops)}
    # pickup index that must precede each local stop (or -1)
    needs = [local.get(s - 1, -1) if s < nos and s & 1 else -1 for s in stops]
    eta = [[1.0 / (1.0 + km(dist[locs[i]][locs[j]])) for j in range(n)] for i in range(n)]
    for i in range(n):
        eta[i][i] = 1.0 / (1.0 + km(dist[bloc][locs[i]]))
    tau = [[params.tsp_scale * x for x in r] for r in eta]
    heur = [[x ** params.beta for x in r] for r in eta]

    def walk() -> Chain:
        done = [False] * n
        bopt = rng.randrange(len(pb.opts[begin]))
        chain = [StopVisit(begin, bopt)]
        here = pb.opts[begin][bopt]
        prev = -1
        for _ in range(n):
            vis = [j for j in range(n) if not done[j] and (needs[j] < 0 or done[needs[j]])]
            if prev < 0:
                w = [tau[j][j] * heur[j][j] for j in vis]
            else:
                w = [tau[prev][j] * heur[prev][j] for j in vis]
            j = vis[_roulette(w, rng)]
            done[j] = True
            s = stops[j]
            opt = pb.nearest_option(s, here)
            chain.append(StopVisit(s, opt))
            here = pb.opts[s][opt]
            prev = j
        chain.append(StopVisit(end, pb.nearest_option(end, here)))
        return chain

    worst_ever = [-INF] * LEVELS
    best_ever_levels = [INF] * LEVELS

    def lay(chain: Chain, key) -> None:
        fs, ps = level_terms(key, worst_ever, best_ever_levels, worst_ever)
        amount = deposit_amount(fs, ps)
        if amount <= 0:
            return
        idx = [local[s] for s, _ in chain[1:-1]]
        tau[idx[0]][idx[0]] += amount
        for a, b in zip(idx, idx[1:]):
            tau[a][b] += amount

    best: Optional[tuple] = None
    recent: list[tuple] = []
    unimproved = 0
    while best is None or (unimproved < params.tsp_max_unimproved and time.monotonic() < deadline):
        chain = walk()
        key = tour_eval(pb, vi, chain).key()
        for i, x in enumerate(key):
            if x != INF:
                worst_ever[i] = max(worst_ever[i], x)
                best_ever_levels[i] = min(best_ever_levels[i], x)
        if best is None or key < best[0]:
            best = (key, chain)
            unimproved = 0
        else:
            unimproved += 1
        recent.append((key, tuple(chain)))
        del recent[:-params.tsp_convergence]
        lay(chain, key)
        cur_key, cur_chain = min(recent, key=lambda r: r[0])
        lay(list(cur_chain), cur_key)  # elitism: recent best and global best
        lay(best[1], best[0])
        if rng.random() < params.evaporation_prob:
            keep = 1.0 - params.evaporation
            for row in tau:
                for j in range(n):
                    row[j] = max(row[j] * keep, EPS)
        if len(recent) == params.tsp_convergence and all(r[1] == recent[0][1] for r in recent):
            break
    return best[1]


def run_tsp_aco(inst: Instance, matrix, vehicle: str, stops: Sequence, params: Optional[AcoParams] = None,
                rng: Optional[random.Random] = None) -> Chain:
    pb = get_problem(inst, matrix)
    ids = {s.id: i for i, s in enumerate(pb.stops)}
    idx = [ids[s] if isinstance(s, str) else int(s) for s in stops]
    return solve_tsp_aco(pb, pb.vehicle_index[vehicle], idx, rng or random.Random(0), params=params)


# --- assignment stage ------------------------------------------------------------------

def solve_vrp_aco(pb: Problem, params: AcoParams, tsp_solver=None,
                  progress: Optional[Callable[[float, Score], None]] = None):
    rng = random.Random(params.rng_seed)
    clock = Clock(params.max_runtime, progress)
    if tsp_solver is None:
        def tsp_solver(pb_, vi, stops, trng, deadline):
            return solve_tsp_aco(pb_, vi, stops, trng, deadline, params)
    ev = StageEvaluator(pb, tsp_solver, params.rng_seed, clock.deadline)
    state = _init(pb, params.best_set_size)
    best: Optional[Candidate] = None
    trajectory = []
    unimproved = 0
    while unimproved < params.max_unimproved and not clock.expired():
        probabilistic = rng.random() < params.novelty_fraction
        cand = ev.evaluate(_construct(pb, state, rng, probabilistic))
        state.observe(cand.score)
        state.offer(cand)
        for member in state.best_set:
            _deposit(pb, state, member.chains, member.score)
        evaporate(state, rng, params)
        if best is None or cand.score < best.score:
            best = cand
            unimproved = 0
            trajectory.append((clock.elapsed(), best.score))
            clock.report(best.score, force=True)
        else:
            unimproved += 1
            clock.report(best.score)
    if best is None:  # budget too small for a single ant
        best = ev.evaluate(_construct(pb, state, rng, False))
        trajectory.append((clock.elapsed(), best.score))
    return best, trajectory, state


def run_vrp_aco(inst: Instance, matrix, params: Optional[AcoParams] = None, tsp_solver=None,
                progress: Optional[Callable[[float, Score], None]] = None) -> EvaluatedSolution:
    pb = get_problem(inst, matrix)
    best, _, _ = solve_vrp_aco(pb, params or AcoParams(), tsp_solver, progress)
    return finish(pb, best)
