import itertools
import json
import random
from collections import Counter
from dataclasses import replace

import pytest

from helpers import instance, order, rand_pd, vehicle
from rvrp.assignment import StageEvaluator, initial_chains
from rvrp.baselines import brute_force_tsp, brute_force_vrp
from rvrp.distance import matrix_for
from rvrp.ga.select import rank_pick, select_parents, tournament_pick
from rvrp.ga.tsp import (TSP_CROSSOVERS, TSP_MUTATORS, _LooseProblem, cx_ordered, precedence_ok,
                         run_tsp_ga, simple_swap, tsp_crossover, tsp_mutate)
from rvrp.ga.vrp import (GaParams, VRP_CROSSOVERS, VRP_MUTATORS, Individual, initial_individual,
                         population_formula, run_vrp_ga, solve_vrp_ga, vrp_crossover, vrp_mutate)
from rvrp.model import Solution, StopVisit
from rvrp.problem import get_problem
from rvrp.score import evaluate_solution, tour_eval


def sv(*stops):
    return [StopVisit(s) for s in stops]


# --- population size ---------------------------------------------------------------

@pytest.mark.parametrize("args, size", [((100, 13, 100, 0), 135), ((0, 1, 0, 0), 4), ((10, 1, 10, 3), 18)])
def test_population_formula(args, size):
    assert population_formula(*args) == size


# --- selection -------------------------------------------------------------------

def test_rank_weights_4_3_2_1():
    rng = random.Random(7)
    n = 100_000
    freq = Counter(rank_pick(4, rng) for _ in range(n))
    for rank, p in enumerate((0.4, 0.3, 0.2, 0.1)):
        assert abs(freq[rank] / n - p) < 0.02


@pytest.mark.parametrize("strategy", ["Uniform", "RankWeighted", "Tournament"])
def test_two_individuals_are_both_parents(strategy):
    rng = random.Random(1)
    for _ in range(50):
        assert sorted(select_parents(["a", "b"], strategy, rng)) == ["a", "b"]


def test_tournament_best_in_sample_wins():
    rng = random.Random(3)
    assert all(tournament_pick(8, rng) == 0 for _ in range(200))
    # with a larger population the winner is always the best sampled index
    for _ in range(200):
        state = rng.getstate()
        sample = random.Random()
        sample.setstate(state)
        expected = min(sample.sample(range(40), 10))
        assert tournament_pick(40, rng) == expected


def test_unknown_strategy():
    with pytest.raises(ValueError):
        select_parents([1, 2, 3], "Roulette", random.Random(0))


# --- sequencing crossovers -----------------------------------------------------------

def test_ordered_crossover_cuts_1_3():
    a = sv(0, 1, 2, 3, 4)
    b = sv(4, 3, 2, 1, 0)
    assert cx_ordered(_LooseProblem(), a, b, None, cuts=(1, 3)) == sv(4, 1, 2, 3, 0)


@pytest.mark.parametrize("kind", TSP_CROSSOVERS)
def test_identical_parents(kind):
    a = sv(8, 0, 1, 2, 3, 4, 5, 9)
    assert tsp_crossover(kind, a, a, random.Random(0)) == a


@pytest.mark.parametrize("kind", TSP_CROSSOVERS)
def test_crossover_keeps_permutation_and_precedence(kind):
    inst = rand_pd(5, n_orders=5)
    m = matrix_for(inst)
    pb = get_problem(inst, m)
    rng = random.Random(11)
    for _ in range(300):
        a, b = (initial_chains(pb, rng)[0] for _ in range(2))
        inner = a[1:-1]
        rng.shuffle(inner)
        a = [a[0], *sorted(inner, key=lambda x: x.stop), a[-1]]
        child = tsp_crossover(kind, a, b, rng, inst, m)
        assert child[0] == a[0] and child[-1] == a[-1]
        assert sorted(child) == sorted(a)
        assert precedence_ok(pb, child[1:-1])


# --- sequencing mutators -------------------------------------------------------------

def test_simple_swap_involution():
    inner = sv(0, 2, 1, 3, 4)
    assert simple_swap(simple_swap(inner, 1, 3), 1, 3) == inner


def _multi_inst():
    pts = {"depot": (0, 0), "x": (100, 0), "y": (0, 100), "z": (50, 50)}
    orders = [order("o0", ("x", "y"), "z"), order("o1", ("x", "y", "z"), "depot")]
    return instance(pts, [vehicle()], orders)


def test_options_chain_rotates_every_multi_option_stop():
    inst = _multi_inst()
    chain = [StopVisit(4), StopVisit(0, 1), StopVisit(1), StopVisit(2, 2), StopVisit(3), StopVisit(5)]
    out = tsp_mutate("OptionsChain", chain, inst, matrix_for(inst), random.Random(0))
    assert [x.option for x in out] == [0, 0, 0, 0, 0, 0]
    assert [x.stop for x in out] == [x.stop for x in chain]


def test_options_mutator_without_choices_asks_for_retry():
    inst = rand_pd(0, n_orders=2)
    chain = sv(4, 0, 1, 2, 3, 5)
    assert tsp_mutate("Options", chain, inst, matrix_for(inst), random.Random(0)) is None


def test_neighborhood_swap_takes_best_swap():
    inst = rand_pd(21, n_orders=2, tw=False)
    m = matrix_for(inst)
    chain = sv(4, 0, 2, 1, 3, 5)

    def s2(c):  # exact meters, not the km-rounded S2
        ev = evaluate_solution(get_problem(inst, m), Solution({"v0": c}))
        t = ev.schedules["v0"]
        secs = t.total_drive + t.total_service + t.total_wait
        return ev.score[:4], t.total_dist + 1000 * secs, ev.score.s3

    for seed in range(20):
        i = random.Random(seed).randrange(4)
        inner = chain[1:-1]
        best, best_c = s2(chain), list(chain)
        for j in range(4):
            if j == i:
                continue
            cand = [chain[0], *simple_swap(inner, i, j), chain[-1]]
            if precedence_ok(get_problem(inst, m), cand[1:-1]) and s2(cand) < best:
                best, best_c = s2(cand), cand
        assert tsp_mutate("NeighborhoodSwap", chain, inst, m, random.Random(seed)) == best_c


@pytest.mark.parametrize("kind", TSP_MUTATORS)
def test_mutators_keep_the_stop_set(kind):
    inst = _multi_inst()
    m = matrix_for(inst)
    pb = get_problem(inst, m)
    rng = random.Random(2)
    for _ in range(200):
        chain = initial_chains(pb, rng)[0]
        out = tsp_mutate(kind, chain, inst, m, rng)
        if out is None:
            continue
        assert sorted(x.stop for x in out) == sorted(x.stop for x in chain)
        assert out[0].stop == chain[0].stop and out[-1].stop == chain[-1].stop
        assert all(0 <= x.option < len(pb.opts[x.stop]) for x in out)
        if kind == "SimpleMove":
            assert precedence_ok(pb, out[1:-1])


# --- sequencing stage end to end -----------------------------------------------------

def test_single_order_chain():
    inst = rand_pd(3, n_orders=1)
    assert run_tsp_ga(inst, matrix_for(inst), "v0", [0, 1]) == sv(2, 0, 1, 3)


def test_collinear_deliveries_in_position_order():
    pts = {"depot": (0, 0)} | {f"c{i}": (1000 * (i + 1), 0) for i in range(4)}
    order_ids = [2, 0, 3, 1]
    inst = instance(pts, [vehicle()], [order(f"o{i}", "depot", f"c{i}") for i in order_ids])
    m = matrix_for(inst)
    chain = run_tsp_ga(inst, m, "v0", range(8), rng=random.Random(4))
    deliveries = [order_ids[x.stop >> 1] for x in chain if x.stop < 8 and x.stop & 1]
    assert deliveries == [0, 1, 2, 3]
    pb = get_problem(inst, m)
    assert tour_eval(pb, 0, chain).key() == brute_force_tsp(inst, m, "v0", range(8))[1]


# --- assignment stage --------------------------------------------------------------

def test_initial_single_order():
    inst = rand_pd(1, n_orders=1)
    ind = initial_individual(inst, matrix_for(inst), random.Random(0))
    assert [x.stop for x in ind.solution.chains["v0"]] == [2, 0, 1, 3]


def test_initial_clusters_by_depot():
    pts = {"A": (0, 0), "B": (20000, 0), "a1": (500, 300), "a2": (200, -600),
           "b1": (20400, 100), "b2": (19500, -300)}
    orders = [order("oa1", "A", "a1"), order("ob1", "B", "b1"), order("oa2", "A", "a2"),
              order("ob2", "B", "b2")]
    inst = instance(pts, [vehicle("vA", start="A"), vehicle("vB", start="B")], orders, speed=13.89)
    m = matrix_for(inst)
    for seed in range(10):
        sol = initial_individual(inst, m, random.Random(seed)).solution
        got = {v: sorted({inst.orders[x.stop >> 1].id for x in c if x.stop < 8}) for v, c in sol.chains.items()}
        assert got == {"vA": ["oa1", "oa2"], "vB": ["ob1", "ob2"]}


def test_initial_respects_vehicle_group():
    pts = {"depot": (0, 0), "x": (1000, 0)}
    vs = [vehicle("plain"), vehicle("crane", groups=frozenset({"crane"})), vehicle("plain2")]
    inst = instance(pts, vs, [order("o0", "depot", "x", required_vehicle_group="crane")])
    m = matrix_for(inst)
    for seed in range(10):
        sol = initial_individual(inst, m, random.Random(seed)).solution
        assert len(sol.chains["crane"]) == 4


def _saving_case(tmp_path):
    ids = ["depot", "a", "b", "c"]
    d = {("depot", "a"): 1000, ("depot", "b"): 5000, ("depot", "c"): 1000,
         ("a", "b"): 4500, ("a", "c"): 400, ("b", "c"): 4800}
    full = [[0 if i == j else d.get((i, j), d.get((j, i))) for j in ids] for i in ids]
    (tmp_path / "m.json").write_text(json.dumps({"ids": ids, "dist": full, "time": full}))
    pts = {k: (0, 0) for k in ids}
    orders = [order("o0", "depot", "a", required_vehicle="v0"), order("o1", "depot", "b", required_vehicle="v1"),
              order("o2", "depot", "c")]
    inst = instance(pts, [vehicle("v0"), vehicle("v1")], orders)
    inst = replace(inst, distance_source={"kind": "matrix", "path": "m.json"})
    return inst, matrix_for(inst, str(tmp_path))


def test_assignment_savings_moves_best_order(tmp_path):
    inst, m = _saving_case(tmp_path)
    pb = get_problem(inst, m)
    start = Solution({"v0": sv(6, 0, 1, 7), "v1": sv(8, 2, 4, 3, 5, 9)})
    ev0 = evaluate_solution(pb, start)
    out = vrp_mutate("Savings", Individual(start, ev0.score), inst, m, random.Random(0), retry=False)
    assert {x.stop for x in out.chains["v0"]} >= {4, 5}
    ev1 = evaluate_solution(pb, out)
    dist = lambda ev: sum(t.total_dist for t in ev.schedules.values())
    assert dist(ev0) - dist(ev1) == 400
    # no other single-order move saves more
    for o, w in itertools.product(range(3), ("v0", "v1")):
        if not pb.allowed(o, pb.vehicle_index[w]):
            continue
        chains = {v: [x for x in c if x.stop >> 1 != o] for v, c in start.chains.items()}
        for i, j in itertools.combinations(range(1, len(chains[w]) + 1), 2):
            c = list(chains[w])
            c.insert(i, StopVisit(2 * o))
            c.insert(j, StopVisit(2 * o + 1))
            if c[-1].stop != chains[w][-1].stop:
                continue
            trial = evaluate_solution(pb, Solution({**chains, w: c}))
            assert dist(ev0) - dist(trial) <= 400


def test_clear_vehicle_single_vehicle_retries():
    inst = rand_pd(2, n_orders=3)
    m = matrix_for(inst)
    ind = initial_individual(inst, m, random.Random(0))
    assert vrp_mutate("ClearVehicle", ind, inst, m, random.Random(0), retry=False) is None
    out = vrp_mutate("ClearVehicle", ind, inst, m, random.Random(0))
    assert sorted(x.stop for x in out.chains["v0"]) == sorted(x.stop for x in ind.solution.chains["v0"])


def test_swap_identical_vehicles_keeps_score():
    inst = rand_pd(6, n_orders=4, n_veh=2, tw=False)
    m = matrix_for(inst)
    pb = get_problem(inst, m)
    ind = initial_individual(inst, m, random.Random(1))
    out = vrp_mutate("SwapVehicle", ind, inst, m, random.Random(0), retry=False)
    assert evaluate_solution(pb, out).score == evaluate_solution(pb, ind.solution).score


def test_overlap_identical_parents():
    inst = rand_pd(8, n_orders=5, n_veh=3)
    m = matrix_for(inst)
    ind = initial_individual(inst, m, random.Random(0))
    child = vrp_crossover("Overlap", ind, ind, inst, m, random.Random(1))
    owner = lambda sol: {x.stop: v for v, c in sol.chains.items() for x in c}
    assert owner(child) == owner(ind.solution)


@pytest.mark.parametrize("kind", VRP_CROSSOVERS)
def test_vrp_crossover_assigns_each_order_once(kind):
    inst = rand_pd(9, n_orders=6, n_veh=3)
    m = matrix_for(inst)
    pb = get_problem(inst, m)
    rng = random.Random(4)
    ev = StageEvaluator(pb, lambda pb_, vi, stops, r, dl: [pb_.empty_chain(vi)[0], *sv(*stops),
                                                         pb_.empty_chain(vi)[1]], 0)
    for _ in range(50):
        a, b = ev.evaluate(initial_chains(pb, rng)), ev.evaluate(initial_chains(pb, rng))
        child = vrp_crossover(kind, a, b, inst, m, rng)
        stops = sorted(x.stop for c in child.chains.values() for x in c[1:-1])
        assert stops == list(range(12))
        for c in child.chains.values():
            owners = {x.stop >> 1 for x in c[1:-1]}
            assert all({2 * o, 2 * o + 1} <= {x.stop for x in c} for o in owners)


@pytest.mark.parametrize("kind", VRP_MUTATORS)
def test_vrp_mutators_keep_pairs_together(kind):
    inst = rand_pd(10, n_orders=6, n_veh=3)
    m = matrix_for(inst)
    rng = random.Random(5)
    for _ in range(50):
        ind = initial_individual(inst, m, rng)
        out = vrp_mutate(kind, ind, inst, m, rng)
        assert sorted(x.stop for c in out.chains.values() for x in c[1:-1]) == list(range(12))
        for c in out.chains.values():
            stops = {x.stop for x in c}
            assert all((s ^ 1) in stops for s in stops if s < 12)


def test_ga_params_validation():
    with pytest.raises(ValueError):
        GaParams(population_size=1)
    with pytest.raises(ValueError):
        GaParams(mutation_prob=1.5)


def test_single_order_terminates_by_unimproved():
    inst = rand_pd(1, n_orders=1)
    m = matrix_for(inst)
    best, traj = solve_vrp_ga(get_problem(inst, m), GaParams(max_unimproved=20, max_runtime=30))
    assert [x.stop for x in best.chains[0]] == [2, 0, 1, 3]
    assert traj and traj[-1][0] < 30


def test_seeded_runs_repeat():
    inst = rand_pd(12, n_orders=5, n_veh=2)
    m = matrix_for(inst)
    p = GaParams(rng_seed=3, max_unimproved=30, max_runtime=60)
    a, b = run_vrp_ga(inst, m, p), run_vrp_ga(inst, m, p)
    assert a.score == b.score and a.solution.chains == b.solution.chains


def test_small_vrp_matches_exhaustive_optimum():
    inst = rand_pd(1000, n_orders=4, n_veh=2)
    m = matrix_for(inst)
    ga = run_vrp_ga(inst, m, GaParams(rng_seed=0, max_runtime=10))
    assert ga.score == brute_force_vrp(inst, m).score
