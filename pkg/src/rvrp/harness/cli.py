"""Command line entry point: ``rvrp {solve,generate,bench,stats}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import Optional, Sequence

from ..baselines import BudgetExceeded, GuardError
from ..distance import MatrixError, matrix_for
from ..model import (dump_instance, expand_stops, instance_from_dict, solution_to_dict,
                     validate_instance)
from ..score import EvaluatedSolution
from .export import export_results
from .generator import SHAPES, generate_instance
from .runner import ExperimentPlan, default_workers, run_experiment, solve
from .stats import wilcoxon_signed_rank

EXIT_OK, EXIT_VALIDATION, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("rvrp")


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_VALIDATION, f"{path} is not valid JSON: {exc}") from exc


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {out}: {exc}") from exc


def result_json(inst, ev: EvaluatedSolution, algorithm: str, seed: int, schedules: bool,
                partial: bool = False) -> str:
    ids = [s.id for s in expand_stops(inst)]
    out = {"instance": inst.name, "algorithm": algorithm, "seed": seed, "partial": partial,
           "score": ev.score.to_json(), "score_display": ev.score.display(),
           "solution": solution_to_dict(inst, ev.solution)}
    if schedules:
        out["schedules"] = {v: t.to_dict(ids) for v, t in sorted(ev.schedules.items())}
    return json.dumps(out, indent=1, sort_keys=True) + "\n"


def cmd_solve(args) -> int:
    data = _read_json(args.instance)
    try:
        inst = instance_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_VALIDATION, f"malformed instance: {exc!r}") from exc
    errors = validate_instance(inst)
    if errors:
        for e in errors:
            print(f"{e.kind}: {e.message}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        matrix = matrix_for(inst, os.path.dirname(os.path.abspath(args.instance)))
    except FileNotFoundError as exc:
        raise CliError(EXIT_IO, str(exc)) from exc
    except MatrixError as exc:
        raise CliError(EXIT_VALIDATION, str(exc)) from exc
    try:
        ev, _ = solve(inst, matrix, args.algo, args.seed, args.budget,
                      allow_huge=args.i_know_this_is_huge)
    except GuardError as exc:
        raise CliError(EXIT_VALIDATION, f"{exc} (pass --i-know-this-is-huge to insist)") from exc
    except BudgetExceeded as exc:
        if exc.best is not None:
            _emit(result_json(inst, exc.best, args.algo, args.seed, args.emit_schedule, True), args.output)
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    _emit(result_json(inst, ev, args.algo, args.seed, args.emit_schedule), args.output)
    return EXIT_OK


def cmd_generate(args) -> int:
    inst = generate_instance(args.shape, args.seed)
    try:
        dump_instance(inst, args.output)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {args.output}: {exc}") from exc
    return EXIT_OK


def cmd_bench(args) -> int:
    data = _read_json(args.plan)
    try:
        plan = ExperimentPlan.from_dict(data, os.path.dirname(os.path.abspath(args.plan)))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_VALIDATION, f"invalid plan: {exc}") from exc
    try:
        os.makedirs(args.output, exist_ok=True)
        records = run_experiment(plan, args.output, args.workers)
        paths = export_results(records, args.output)
    except OSError as exc:
        raise CliError(EXIT_IO, str(exc)) from exc
    for p in paths:
        print(p)
    return EXIT_OK


def parse_sample_ref(ref: str) -> tuple[str, dict[str, str]]:
    """``runs.csv:algorithm=GA,instance=X`` -> (path, filters)."""
    path, sep, tail = ref.rpartition(":")
    if not sep or "=" not in tail:
        return ref, {}
    filters = {}
    for part in tail.split(","):
        key, eq, value = part.partition("=")
        if not eq:
            raise CliError(EXIT_VALIDATION, f"bad filter {part!r} in {ref!r}")
        filters[key.strip()] = value.strip()
    return path, filters


def load_sample(ref: str, metric: str) -> dict[tuple[str, str], float]:
    path, filters = parse_sample_ref(ref)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    out = {}
    for row in rows:
        if any(row.get(k) != v for k, v in filters.items()):
            continue
        if row.get(metric, "") == "":
            continue
        out[(row["instance"], row["seed"])] = float(row[metric])
    return out


def cmd_stats(args) -> int:
    a = load_sample(args.a, args.metric)
    b = load_sample(args.b, args.metric)
    keys = sorted(a.keys() & b.keys())
    try:
        res = wilcoxon_signed_rank([a[k] for k in keys], [b[k] for k in keys], args.alpha)
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, f"{exc} (matched pairs: {len(keys)})") from exc
    print(json.dumps({"pairs": len(keys), "statistic": res.statistic, "p_value": res.p_value,
                      "reject": res.reject, "n_nonzero": res.n, "method": res.method,
                      "alpha": args.alpha}, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rvrp", description="Rich VRP solvers and benchmark harness.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--algo", required=True, choices=["ga", "aco", "tabu", "savings", "brute"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--budget", type=float, default=60.0, help="wall-clock seconds")
    s.add_argument("--emit-schedule", action="store_true", help="include per-vehicle timelines")
    s.add_argument("--i-know-this-is-huge", action="store_true",
                   help="let brute force run past its size guard")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("generate", help="write a synthetic instance")
    g.add_argument("--shape", required=True, choices=sorted(SHAPES))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("bench", help="run an experiment plan")
    b.add_argument("--plan", required=True)
    b.add_argument("-o", "--output", required=True)
    b.add_argument("--workers", type=int, default=default_workers())
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("stats", help="paired Wilcoxon signed-rank test on two run sets")
    t.add_argument("--a", required=True, help="runs.csv[:key=value,...]")
    t.add_argument("--b", required=True)
    t.add_argument("--metric", default="s2")
    t.add_argument("--alpha", type=float, default=0.05)
    t.set_defaults(func=cmd_stats)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
