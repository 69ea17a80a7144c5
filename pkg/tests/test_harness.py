import csv
import itertools
import json
import os
import random

import pytest

from helpers import rand_pd
from rvrp.harness.cli import main
from rvrp.harness.export import export_results
from rvrp.harness.generator import SHAPES, generate_instance
from rvrp.harness.runner import ExperimentPlan, RunRecord, load_records, run_experiment
from rvrp.harness.stats import exact_lower_tail, mean_std, signed_ranks, wilcoxon_signed_rank
from rvrp.model import dump_instance, instance_to_dict, validate_instance
from rvrp.score import Score

scipy_stats = pytest.importorskip("scipy.stats")


# --- generator ---------------------------------------------------------------------

@pytest.mark.parametrize("shape, n_orders, n_veh, pd, pauses", [
    ("TSP-I", 10, 1, False, False), ("TSP-II", 30, 1, False, False), ("TSP-II-P", 30, 1, False, True),
    ("VRP-I", 53, 5, False, False), ("VRP-I-P", 53, 5, False, True), ("VRP-II", 100, 13, False, False),
    ("TSP-PD", 10, 1, True, False), ("VRP-PD-P", 62, 7, True, True)])
def test_shapes(shape, n_orders, n_veh, pd, pauses):
    inst = generate_instance(shape, 0)
    assert validate_instance(inst) == []
    assert (len(inst.orders), len(inst.vehicles)) == (n_orders, n_veh)
    assert bool(inst.pause_rules) == pauses
    depot = inst.vehicles[0].start_options[0]
    pickups = [o.pickup_options[0] for o in inst.orders]
    if pd:
        assert len(set(pickups)) == n_orders and depot not in pickups
    else:
        assert set(pickups) == {depot}
    assert all(o.tw_delivery is not None for o in inst.orders)
    cap = sum(v.capacity.weight for v in inst.vehicles)
    assert sum(o.demand.weight for o in inst.orders) <= cap


def test_generator_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    dump_instance(generate_instance("VRP-PD-P", 3), a)
    dump_instance(generate_instance("VRP-PD-P", 3), b)
    assert a.read_bytes() == b.read_bytes()
    assert instance_to_dict(generate_instance("VRP-PD-P", 4)) != json.loads(a.read_text())


def test_generator_unknown_shape():
    with pytest.raises(ValueError):
        generate_instance("VRP-III", 0)
    assert len(SHAPES) == 8


# --- runner ------------------------------------------------------------------------

def test_three_seeds_three_records(tmp_path):
    plan = ExperimentPlan([{"shape": "TSP-I", "seed": 0}], ["Savings"], [0, 1, 2], 5)
    recs = run_experiment(plan, str(tmp_path))
    assert len(recs) == 3 and all(r.status == "ok" for r in recs)
    assert [r.to_dict() for r in load_records(tmp_path / "records.jsonl")] == [r.to_dict() for r in recs]


def test_brute_force_is_seed_independent(tmp_path):
    path = tmp_path / "tiny.json"
    dump_instance(rand_pd(7, n_orders=3, n_veh=2), path)
    recs = run_experiment(ExperimentPlan(["tiny.json"], ["brute"], [0, 1, 2], 30, str(tmp_path)))
    assert len({r.final_score for r in recs}) == 1
    assert {r.data_source for r in recs} == {"file"}


def test_failed_run_is_recorded():
    recs = run_experiment(ExperimentPlan(["missing.json"], ["GA"], [0], 5))
    assert recs[0].status == "failed" and recs[0].error


@pytest.mark.slow
def test_budget_is_respected():
    plan = ExperimentPlan([{"shape": "VRP-I", "seed": 1}], ["GA", "ACO", "Tabu"], [0], 5)
    recs = run_experiment(plan, workers=3)
    assert all(r.status == "ok" and r.wall_time <= 5 + 1 for r in recs), [r.wall_time for r in recs]


def test_plan_validation():
    with pytest.raises(ValueError):
        ExperimentPlan([], ["GA"])
    with pytest.raises(ValueError):
        ExperimentPlan(["x.json"], ["Simplex"])
    with pytest.raises(ValueError):
        ExperimentPlan(["x.json"], ["GA"], time_budget=0.5)
    with pytest.raises(ValueError, match="time_budget"):
        ExperimentPlan.from_dict({"instances": ["x.json"], "algorithms": ["GA"]})


def test_record_rejects_worsening_trajectory():
    with pytest.raises(AssertionError):
        RunRecord("i", "GA", 0, Score(), [(0.0, Score(0, 0, 0, 0, 5, 0)), (1.0, Score(0, 0, 0, 0, 6, 0))], 1.0)


# --- Wilcoxon ------------------------------------------------------------------------

def enumerate_p(diffs):
    """Two-sided exact p by listing every sign pattern."""
    ranks = [abs(r) for r in signed_ranks(diffs)]
    w_obs = min(sum(r for r, d in zip(ranks, diffs) if d > 0), sum(r for r, d in zip(ranks, diffs) if d < 0))
    total = sum(ranks)
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(ranks)):
        wp = sum(r for r, s in zip(ranks, signs) if s)
        if min(wp, total - wp) <= w_obs + 1e-9:
            hits += 1
    return min(1.0, hits / 2 ** len(ranks))


def test_identical_samples():
    res = wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])
    assert res.p_value == 1.0 and not res.reject


def test_six_positive_differences():
    res = wilcoxon_signed_rank([2, 4, 6, 8, 10, 12], [1, 2, 3, 4, 5, 6])
    assert res.p_value == 0.03125 and res.reject and res.statistic == 0


def test_moderate_p_is_not_rejected_at_5_percent():
    a, b = [3, 5, 1, 8, 6, 9, 2, 7], [1, 2, 2, 5, 7, 4, 3, 2]
    res = wilcoxon_signed_rank(a, b)
    assert res.p_value == pytest.approx(enumerate_p([x - y for x, y in zip(a, b)]))
    assert 0.05 < res.p_value < 0.2 and not res.reject
    assert wilcoxon_signed_rank(a, b, alpha=0.2).reject


@pytest.mark.parametrize("seed", range(20))
def test_exact_matches_enumeration_with_ties(seed):
    rng = random.Random(seed)
    n = rng.randint(5, 10)
    a = [rng.randint(0, 6) for _ in range(n)]
    b = [rng.randint(0, 6) for _ in range(n)]
    diffs = [x - y for x, y in zip(a, b) if x != y]
    res = wilcoxon_signed_rank(a, b)
    if not diffs:
        assert res.p_value == 1.0
        return
    assert res.p_value == pytest.approx(enumerate_p(diffs), abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_exact_agrees_with_scipy_without_ties(seed):
    rng = random.Random(seed)
    n = rng.randint(6, 20)
    a = [rng.random() for _ in range(n)]
    b = [x + rng.gauss(0.1, 0.3) for x in a]
    ref = scipy_stats.wilcoxon(a, b, method="exact")
    assert wilcoxon_signed_rank(a, b).p_value == pytest.approx(ref.pvalue, rel=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_normal_approximation_agrees_with_scipy(seed):
    rng = random.Random(seed)
    n = 40
    a = [rng.randint(0, 30) for _ in range(n)]
    b = [rng.randint(0, 30) for _ in range(n)]
    mine = wilcoxon_signed_rank(a, b)
    ref = scipy_stats.wilcoxon(a, b, method="approx", correction=False, zero_method="wilcox")
    assert mine.method == "normal"
    assert mine.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_wilcoxon_preconditions():
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([1, 2, 3], [1, 2, 3])
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 2, 3, 4])


def test_exact_tail_half_ranks():
    # ranks 1.5, 1.5, 3: patterns give W+ in {0, 1.5, 1.5, 3, 3, 4.5, 4.5, 6}
    assert exact_lower_tail([1.5, 1.5, 3], 1.5) == 3 / 8


def test_mean_std():
    assert mean_std([2, 4, 4, 4, 5, 5, 7, 9]) == pytest.approx((5.0, 2.138089935))


# --- export --------------------------------------------------------------------------

def _records(n=30, s2=2919200, s1=0):
    return [RunRecord("TSP-I-s0", "GA", k, Score(0, 0, 0, s1, s2, 10), [(0.5, Score(0, 0, 0, s1, s2, 10))], 1.0)
            for k in range(n)]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_export_summary_and_display(tmp_path):
    paths = export_results(_records(), tmp_path)
    assert sorted(os.path.basename(p) for p in paths) == ["runs.csv", "summary.csv", "summary.json",
                                                           "trajectories.csv"]
    summary = _rows(tmp_path / "summary.csv")
    assert summary[0]["tw_met"] == "30/30"
    assert float(_rows(tmp_path / "runs.csv")[0]["s2_display"]) == 291.92
    assert json.loads((tmp_path / "summary.json").read_text())["groups"][0]["tw_met"] == "30/30"


def test_export_infeasible_levels_blank(tmp_path):
    inf = float("inf")
    rec = RunRecord("x", "Savings", 0, Score(0, 3, inf, inf, inf, inf), [], 0.1)
    export_results([rec], tmp_path)
    row = _rows(tmp_path / "runs.csv")[0]
    assert row["h2"] == "3" and row["s2"] == "" and row["s2_display"] == ""


def test_export_empty_is_error(tmp_path):
    with pytest.raises(ValueError):
        export_results([], tmp_path)


def test_export_unwritable_leaves_nothing(tmp_path):
    target = tmp_path / "gone"
    with pytest.raises(OSError):
        export_results(_records(3), target)
    assert not target.exists()


# --- CLI -------------------------------------------------------------------------------

def test_cli_generate_and_solve(tmp_path, capsys):
    inst = tmp_path / "tsp.json"
    assert main(["generate", "--shape", "TSP-I", "--seed", "2", "-o", str(inst)]) == 0
    out = tmp_path / "sol.json"
    assert main(["solve", "--instance", str(inst), "--algo", "savings", "--emit-schedule",
                 "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["algorithm"] == "savings" and "v0" in data["schedules"]
    assert len(data["score"]) == 6


def test_cli_validation_error(tmp_path):
    bad = tmp_path / "bad.json"
    d = instance_to_dict(rand_pd(0, n_orders=1))
    d["orders"][0]["delivery_location"] = "nowhere"
    bad.write_text(json.dumps(d))
    assert main(["solve", "--instance", str(bad), "--algo", "ga"]) == 2


def test_cli_missing_file_is_io_error(tmp_path):
    assert main(["solve", "--instance", str(tmp_path / "none.json"), "--algo", "ga"]) == 4


def test_cli_brute_guard(tmp_path):
    path = tmp_path / "big.json"
    dump_instance(rand_pd(0, n_orders=5, n_veh=2), path)
    assert main(["solve", "--instance", str(path), "--algo", "brute"]) == 2


def test_cli_brute_out_of_budget(tmp_path):
    path = tmp_path / "mid.json"
    dump_instance(rand_pd(0, n_orders=4, n_veh=3), path)
    out = tmp_path / "partial.json"
    # nothing is complete after zero seconds, so there is no partial result to write
    assert main(["solve", "--instance", str(path), "--algo", "brute", "--budget", "0", "-o", str(out)]) == 3
    assert not out.exists()


def test_cli_bench_and_stats(tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"instances": [{"shape": "TSP-I", "seed": 0}], "algorithms": ["Savings", "Tabu"],
                                "seeds": [0, 1, 2, 3, 4], "time_budget": 1}))
    out = tmp_path / "out"
    assert main(["bench", "--plan", str(plan), "-o", str(out), "--workers", "1"]) == 0
    assert (out / "runs.csv").exists() and (out / "records.jsonl").exists()
    capsys.readouterr()
    runs = out / "runs.csv"
    assert main(["stats", "--a", f"{runs}:algorithm=Savings", "--b", f"{runs}:algorithm=Tabu"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["pairs"] == 5 and 0 <= res["p_value"] <= 1


def test_cli_stats_too_few_pairs(tmp_path):
    runs = tmp_path / "runs.csv"
    export_results(_records(3), tmp_path)
    assert main(["stats", "--a", str(runs), "--b", str(runs)]) == 2
