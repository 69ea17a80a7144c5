"""Placing a fixed visit sequence on the time axis.

Fixed pauses are hard: nobody drives during a pause and a service only runs
through one when the stop allows splitting (the pause is then added to the
service). Otherwise the service moves behind the pause. Visits reaching a
window too early first pull the tour start later, as far as the tour-start
buffer allows without making any visit later than it already is; what is
left becomes waiting time (or early service when the vehicle cannot wait).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

from .model import Instance, StopVisit, format_time
from .problem import NO_TW_START, Problem, get_problem


@dataclass
class ScheduledVisit:
    visit: StopVisit
    arrival: int
    service_start: int
    service_end: int
    wait_before: int
    early: int = 0
    late: int = 0


@dataclass
class ScheduledTour:
    vehicle: str
    start_time: int
    end_time: int
    duration: int
    visits: list[ScheduledVisit]
    pauses: list[tuple[int, int]]
    total_drive: int
    total_wait: int
    total_service: int
    total_dist: int
    distinct_locations: int
    chain_length: int
    tw_penalty: int
    early_penalty: int = 0
    drive_segments: list[tuple[int, int]] = field(default_factory=list)
    service_segments: list[tuple[int, int, bool]] = field(default_factory=list)  # (start, end, split)

    def to_dict(self, stop_ids: Optional[Sequence[str]] = None) -> dict:
        return {
            "vehicle": self.vehicle,
            "start_time": self.start_time, "end_time": self.end_time,
            "start": format_time(self.start_time), "end": format_time(self.end_time),
            "duration": self.duration,
            "visits": [{
                "stop": stop_ids[v.visit.stop] if stop_ids else v.visit.stop,
                "option": v.visit.option,
                "arrival": v.arrival, "service_start": v.service_start,
                "service_end": v.service_end, "wait_before": v.wait_before,
                "early": v.early, "late": v.late,
            } for v in self.visits],
            "pauses": [list(p) for p in self.pauses],
            "total_drive": self.total_drive, "total_wait": self.total_wait,
            "total_service": self.total_service, "total_dist": self.total_dist,
            "distinct_locations": self.distinct_locations, "chain_length": self.chain_length,
            "tw_penalty": self.tw_penalty, "early_penalty": self.early_penalty,
        }


class _Run(NamedTuple):
    arr: list
    st: list
    en: list
    wait: list
    end: int
    late: int
    early: int


def _drive(t: int, d: int, pauses, segs) -> int:
    """Arrival time after ``d`` seconds of driving from ``t``, resting through pauses."""
    if d <= 0:
        return t
    for ps, pe in pauses:
        if pe <= t:
            continue
        if ps <= t:
            t = pe
        elif ps < t + d:
            if segs is not None:
                segs.append((t, ps))
            d -= ps - t
            t = pe
        else:
            break
    if segs is not None:
        segs.append((t, t + d))
    return t + d


def _overlap(a: int, b: int, pauses) -> int:
    tot = 0
    for ps, pe in pauses:
        lo = ps if ps > a else a
        hi = pe if pe < b else b
        if hi > lo:
            tot += hi - lo
    return tot


def _simulate(t0, legs, serv, tws, twe, split, pauses, can_wait, dsegs=None, ssegs=None) -> _Run:
    n = len(serv)
    arr = [0] * n
    st_l = [0] * n
    en_l = [0] * n
    wait_l = [0] * n
    late = early = 0
    t = t0
    for k in range(n):
        a = _drive(t, legs[k], pauses, dsegs) if pauses else t + legs[k]
        st = a
        ws = tws[k]
        if st < ws and can_wait:
            st = ws
        d = serv[k]
        if pauses:
            for ps, pe in pauses:
                if ps <= st < pe:
                    st = pe
            if d > 0:
                if split[k]:
                    end = st
                    rem = d
                    for ps, pe in pauses:
                        if pe <= end:
                            continue
                        if ps >= end + rem:
                            break
                        if ssegs is not None:
                            ssegs.append((end, ps, True))
                        rem -= ps - end
                        end = pe
                    if ssegs is not None:
                        ssegs.append((end, end + rem, True))
                    end += rem
                else:
                    for ps, pe in pauses:
                        if pe <= st:
                            continue
                        if ps >= st + d:
                            break
                        st = pe
                    end = st + d
                    if ssegs is not None:
                        ssegs.append((st, end, False))
            else:
                end = st
            w = st - a - _overlap(a, st, pauses) if st > a else 0
        else:
            end = st + d
            w = st - a
            if ssegs is not None and d > 0:
                ssegs.append((st, end, split[k]))
        arr[k] = a
        st_l[k] = st
        en_l[k] = end
        wait_l[k] = w
        if st > twe[k]:
            late += st - twe[k]
        elif st < ws:
            early += ws - st
        t = end
    t_end = _drive(t, legs[n], pauses, dsegs) if pauses else t + legs[n]
    return _Run(arr, st_l, en_l, wait_l, t_end, late, early)


def place(t_lo: int, t_hi: int, legs, serv, tws, twe, split, pauses, can_wait,
          end_limit: int = 1 << 40) -> tuple[int, _Run]:
    """Choose the tour start in ``[t_lo, t_hi]`` and simulate.

    Returns ``(t0, run)``. The start only moves later when that does not add
    lateness anywhere nor push the end further past ``end_limit``.
    """
    t0 = t_lo
    buf = t_hi - t_lo
    run = _simulate(t0, legs, serv, tws, twe, split, pauses, can_wait)
    if buf <= 0:
        return t0, run
    n = len(serv)
    k = 0
    while buf > 0 and k < n:
        while k < n and not run.arr[k] < tws[k]:
            k += 1
        if k == n:
            break
        base_late = run.late
        base_over = max(run.end - end_limit, 0)
        target = tws[k]

        def ok(r):
            return (r.late == base_late and r.arr[k] <= target
                    and max(r.end - end_limit, 0) <= base_over)

        delta = min(buf, target - run.arr[k])
        # slack of the windows already met caps the shift
        for j in range(k):
            slack = twe[j] - run.st[j]
            if slack < delta:
                delta = slack if slack > 0 else 0
        if delta > 0:
            cand = _simulate(t0 + delta, legs, serv, tws, twe, split, pauses, can_wait)
            if not ok(cand):
                lo, hi = 0, delta  # ok(lo), not ok(hi); all times are monotone in t0
                cand = None
                while hi - lo > 1:
                    mid = (lo + hi) // 2
                    r = _simulate(t0 + mid, legs, serv, tws, twe, split, pauses, can_wait)
                    if ok(r):
                        lo, cand = mid, r
                    else:
                        hi = mid
                delta = lo
            if delta > 0:
                t0 += delta
                buf -= delta
                run = cand
        k += 1
    return t0, run


def chain_arrays(pb: Problem, vi: int, chain: Sequence[StopVisit]):
    """Per-visit inputs for the simulator (inner visits only) plus leg data."""
    dist = pb.dist
    time = pb.time
    opts = pb.opts
    serv_all = pb.vservice[vi]
    locs = [opts[s][o] for s, o in chain]
    inner = chain[1:-1]
    legs = [time[locs[i]][locs[i + 1]] for i in range(len(locs) - 1)]
    dsum = 0
    for i in range(len(locs) - 1):
        dsum += dist[locs[i]][locs[i + 1]]
    serv = [serv_all[s] for s, _ in inner]
    tws = [pb.tw_s[s] for s, _ in inner]
    twe = [pb.tw_e[s] for s, _ in inner]
    split = [pb.split[s] for s, _ in inner]
    return locs, legs, dsum, serv, tws, twe, split


def _schedule(pb: Problem, vi: int, chain: Sequence[StopVisit]) -> ScheduledTour:
    veh = pb.inst.vehicles[vi]
    locs, legs, dsum, serv, tws, twe, split = chain_arrays(pb, vi, chain)
    w = veh.tour_start_window
    t0, _ = place(w.start, w.end, legs, serv, tws, twe, split, pb.pauses, veh.can_wait,
                  veh.tour_end_limit)
    dsegs: list = []
    ssegs: list = []
    run = _simulate(t0, legs, serv, tws, twe, split, pb.pauses, veh.can_wait, dsegs, ssegs)
    inner = chain[1:-1]
    visits = [ScheduledVisit(chain[0], t0, t0, t0, 0)]
    for k, sv in enumerate(inner):
        st = run.st[k]
        has = pb.has_tw[sv.stop]
        visits.append(ScheduledVisit(
            sv, run.arr[k], st, run.en[k], run.wait[k],
            early=max(tws[k] - st, 0) if has else 0,
            late=max(st - twe[k], 0) if has else 0))
    visits.append(ScheduledVisit(chain[-1], run.end, run.end, run.end, 0))
    pauses = [(ps, pe) for ps, pe in pb.pauses if ps < run.end and pe > t0]
    return ScheduledTour(
        vehicle=veh.id, start_time=t0, end_time=run.end, duration=run.end - t0,
        visits=visits, pauses=pauses, total_drive=sum(legs), total_wait=sum(run.wait),
        total_service=sum(serv), total_dist=dsum,
        distinct_locations=len(set(locs[1:-1])), chain_length=len(inner),
        tw_penalty=run.late, early_penalty=run.early,
        drive_segments=dsegs, service_segments=ssegs)


def schedule_tour(inst: Instance, vehicle: str, chain: Sequence[StopVisit], matrix) -> ScheduledTour:
    """Timeline for one vehicle's chain (TourBegin first, TourEnd last)."""
    pb = get_problem(inst, matrix)
    return _schedule(pb, pb.vehicle_index[vehicle], chain)


def pause_violations(tour: ScheduledTour, pauses: Sequence[tuple[int, int]]) -> list[tuple]:
    """Driving or non-split service intervals intersecting a pause window."""
    bad = []
    for ps, pe in pauses:
        for a, b in tour.drive_segments:
            if max(a, ps) < min(b, pe):
                bad.append(("drive", a, b, ps, pe))
        for a, b, sp in tour.service_segments:
            if max(a, ps) < min(b, pe):
                bad.append(("service", a, b, ps, pe))
    return bad


__all__ = ["ScheduledVisit", "ScheduledTour", "schedule_tour", "place", "pause_violations",
           "NO_TW_START"]
