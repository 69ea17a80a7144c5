"""Seeded multi-run experiments with wall-clock budgets and incremental persistence."""

from __future__ import annotations

import json
import logging
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from ..aco import AcoParams, solve_vrp_aco
from ..assignment import finish
from ..baselines import (BudgetExceeded, TabuParams, brute_force_vrp, savings_construct,
                         solve_tabu)
from ..distance import matrix_for
from ..model import Instance, load_instance
from ..problem import get_problem
from ..score import (WORST, EvaluatedSolution, Score, chains_by_index, compare,
                     evaluate_solution)
from ..ga.vrp import GaParams, solve_vrp_ga
from .generator import generate_instance

log = logging.getLogger(__name__)

ALGORITHMS = ("GA", "ACO", "Tabu", "Savings", "BruteForce")
_ALIASES = {a.lower(): a for a in ALGORITHMS} | {"brute": "BruteForce"}

InstanceRef = Union[str, dict]


def canonical_algorithm(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}") from None


@dataclass
class ExperimentPlan:
    instances: list[InstanceRef]
    algorithms: list[str]
    seeds: list[int] = field(default_factory=lambda: list(range(30)))
    time_budget: float = 60.0
    base_dir: str = "."

    def __post_init__(self):
        if not self.instances or not self.algorithms or not self.seeds:
            raise ValueError("instances, algorithms and seeds must be non-empty")
        if not 1 <= self.time_budget <= 3600:
            raise ValueError("time_budget must lie in [1, 3600] seconds")
        self.algorithms = [canonical_algorithm(a) for a in self.algorithms]

    @classmethod
    def from_dict(cls, data: dict, base_dir: str = ".") -> "ExperimentPlan":
        if "time_budget" not in data:
            raise ValueError("plan must state time_budget (seconds per run)")
        return cls(list(data["instances"]), list(data["algorithms"]),
                   list(data.get("seeds", range(30))), float(data["time_budget"]), base_dir)

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), str(Path(path).parent))


@dataclass
class RunRecord:
    instance: str
    algorithm: str
    seed: int
    final_score: Score
    trajectory: list[tuple[float, Score]]
    wall_time: float
    status: str = "ok"  # ok | budget | failed
    error: str = ""
    data_source: str = "synthetic"

    def __post_init__(self):
        for (_, a), (_, b) in zip(self.trajectory, self.trajectory[1:]):
            if compare(b, a) > 0:
                raise AssertionError(f"trajectory got worse in {self.instance}/{self.algorithm}")

    @property
    def tw_met(self) -> bool:
        return self.final_score.s1 == 0

    def to_dict(self) -> dict:
        return {"instance": self.instance, "algorithm": self.algorithm, "seed": self.seed,
                "final_score": self.final_score.to_json(),
                "trajectory": [[round(t, 6), s.to_json()] for t, s in self.trajectory],
                "tw_met": self.tw_met, "wall_time": self.wall_time, "status": self.status,
                "error": self.error, "data_source": self.data_source}

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(d["instance"], d["algorithm"], d["seed"], Score.from_json(d["final_score"]),
                   [(t, Score.from_json(s)) for t, s in d["trajectory"]], d["wall_time"],
                   d.get("status", "ok"), d.get("error", ""), d.get("data_source", "synthetic"))


def resolve_instance(ref: InstanceRef, base_dir: str = ".") -> tuple[Instance, str, str]:
    """Returns (instance, display name, data source label)."""
    if isinstance(ref, dict):
        inst = generate_instance(ref["shape"], int(ref.get("seed", 0)))
        return inst, inst.name, "synthetic"
    path = ref if os.path.isabs(ref) else os.path.join(base_dir, ref)
    inst = load_instance(path)
    return inst, inst.name or Path(path).stem, "file"


def solve(inst: Instance, matrix, algorithm: str, seed: int, budget: float,
          allow_huge: bool = False) -> tuple[EvaluatedSolution, list[tuple[float, Score]]]:
    """One run; BruteForce may raise BudgetExceeded carrying its best-so-far."""
    algorithm = canonical_algorithm(algorithm)
    pb = get_problem(inst, matrix)
    t0 = time.monotonic()
    if algorithm == "GA":
        best, traj = solve_vrp_ga(pb, GaParams(max_runtime=budget, rng_seed=seed))
        return finish(pb, best), traj
    if algorithm == "ACO":
        best, traj, _ = solve_vrp_aco(pb, AcoParams(max_runtime=budget, rng_seed=seed))
        return finish(pb, best), traj
    if algorithm == "Tabu":
        start = chains_by_index(pb, savings_construct(inst, matrix))
        best, traj = solve_tabu(pb, start, TabuParams(max_runtime=budget, rng_seed=seed))
        return finish(pb, best), traj
    if algorithm == "Savings":
        ev = evaluate_solution(pb, savings_construct(inst, matrix))
        return ev, [(time.monotonic() - t0, ev.score)]
    ev = brute_force_vrp(inst, matrix, budget=budget, allow_huge=allow_huge)
    return ev, [(time.monotonic() - t0, ev.score)]


def run_one(ref: InstanceRef, base_dir: str, algorithm: str, seed: int, budget: float) -> RunRecord:
    name, source = str(ref), "synthetic"
    t0 = time.monotonic()
    try:
        inst, name, source = resolve_instance(ref, base_dir)
        matrix = matrix_for(inst, base_dir)
        ev, traj = solve(inst, matrix, algorithm, seed, budget)
        return RunRecord(name, algorithm, seed, ev.score, traj, time.monotonic() - t0,
                         data_source=source)
    except BudgetExceeded as exc:
        best = exc.best
        score = best.score if best is not None else WORST
        return RunRecord(name, algorithm, seed, score, [(time.monotonic() - t0, score)],
                         time.monotonic() - t0, "budget", str(exc), source)
    except Exception as exc:  # a failed run must not stop the experiment
        log.warning("run %s/%s/%s failed: %s", name, algorithm, seed, exc)
        return RunRecord(name, algorithm, seed, WORST, [], time.monotonic() - t0, "failed",
                         "".join(traceback.format_exception_only(type(exc), exc)).strip(), source)


def run_experiment(plan: ExperimentPlan, out_dir: Optional[str] = None,
                   workers: int = 1) -> list[RunRecord]:
    """Cartesian product instance x algorithm x seed.

    With ``out_dir`` every finished record is appended to ``records.jsonl`` right away.
    """
    jobs = [(ref, plan.base_dir, algo, seed, plan.time_budget)
            for ref in plan.instances for algo in plan.algorithms for seed in plan.seeds]
    sink = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        sink = open(os.path.join(out_dir, "records.jsonl"), "a")
    records: list[RunRecord] = []

    def keep(rec: RunRecord):
        records.append(rec)
        if sink is not None:
            sink.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
            sink.flush()
            os.fsync(sink.fileno())

    try:
        if workers <= 1:
            for job in jobs:
                keep(run_one(*job))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for rec in pool.map(run_one, *zip(*jobs)):
                    keep(rec)
    finally:
        if sink is not None:
            sink.close()
    return records


def load_records(path) -> list[RunRecord]:
    with open(path) as fh:
        return [RunRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def default_workers() -> int:
    return max(1, (os.cpu_count() or 2) // 2)
