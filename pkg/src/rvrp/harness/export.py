"""CSV/JSON export of run records: all files are rendered first, then swapped in."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from collections import defaultdict
from typing import Sequence

from ..score import DISPLAY_DIVISOR, INF
from .runner import RunRecord
from .stats import mean_std

LEVELS = ("h1", "h2", "h3", "s1", "s2", "s3")


def _num(x):
    return "" if x == INF else int(x)


def _display(s2):
    return "" if s2 == INF else s2 / DISPLAY_DIVISOR


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def summarize(records: Sequence[RunRecord]) -> list[dict]:
    groups: dict[tuple[str, str], list[RunRecord]] = defaultdict(list)
    for r in records:
        groups[(r.instance, r.algorithm)].append(r)
    out = []
    for (inst, algo), recs in groups.items():
        s2 = [r.final_score.s2 for r in recs if r.final_score.s2 != INF]
        mean, std = mean_std(s2) if s2 else (None, None)
        met = sum(r.tw_met for r in recs)
        out.append({
            "instance": inst, "algorithm": algo, "runs": len(recs),
            "failed": sum(r.status == "failed" for r in recs),
            "feasible": sum(r.final_score.feasible for r in recs),
            "s2_mean": mean, "s2_std": std,
            "s2_display_mean": None if mean is None else mean / DISPLAY_DIVISOR,
            "s2_display_std": None if std is None else std / DISPLAY_DIVISOR,
            "tw_met": f"{met}/{len(recs)}",
            "data_source": ",".join(sorted({r.data_source for r in recs})),
        })
    return out


def render(records: Sequence[RunRecord]) -> dict[str, str]:
    runs = _csv(
        ["data_source", "instance", "algorithm", "seed", "status", *LEVELS, "s2_display", "tw_met",
         "wall_time"],
        ([r.data_source, r.instance, r.algorithm, r.seed, r.status,
          *(_num(x) for x in r.final_score), _display(r.final_score.s2), int(r.tw_met),
          f"{r.wall_time:.6f}"] for r in records))
    traj = _csv(
        ["data_source", "instance", "algorithm", "seed", "elapsed", *LEVELS, "s2_display"],
        ([r.data_source, r.instance, r.algorithm, r.seed, f"{t:.6f}", *(_num(x) for x in s),
          _display(s.s2)] for r in records for t, s in r.trajectory))
    summary = summarize(records)
    cols = ["data_source", "instance", "algorithm", "runs", "failed", "feasible", "s2_mean", "s2_std",
            "s2_display_mean", "s2_display_std", "tw_met"]
    summary_csv = _csv(cols, (["" if row[c] is None else row[c] for c in cols] for row in summary))
    sources = sorted({r.data_source for r in records})
    summary_json = json.dumps({"data_source": sources, "groups": summary}, indent=1,
                              sort_keys=True, allow_nan=False)
    return {"runs.csv": runs, "trajectories.csv": traj, "summary.csv": summary_csv,
            "summary.json": summary_json + "\n"}


def export_results(records: Sequence[RunRecord], out_dir) -> list[str]:
    """Writes runs/trajectories/summary files; on I/O failure no target file is touched."""
    if not records:
        raise ValueError("no records to export")
    files = render(records)
    staged: list[tuple[str, str]] = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out_dir)
            staged.append((tmp, os.path.join(out_dir, name)))
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [final for _, final in staged]
