"""Small instance builders shared by the test modules."""

import random

from rvrp.model import (Instance, Load, Location, Order, PauseRule, TimeWindow, Vehicle)

DAY_START = 6 * 3600
ACCEPTANCE: dict = {}  # criterion number -> (passed, detail), printed at the end of the run


def report(num: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE[num] = (ok, detail)
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok
PAUSES = ((34200, 36000), (41400, 43200), (52200, 54000))


def _opts(x):
    return (x,) if isinstance(x, str) else tuple(x)


def vehicle(vid="v0", start="depot", end=None, cap=Load(100, 20.0, 3000.0),
            window=(DAY_START, DAY_START), end_limit=22 * 3600, max_dur=16 * 3600, **kw):
    return Vehicle(vid, cap, _opts(start), _opts(end or start), TimeWindow(*window), end_limit,
                   max_dur, **kw)


def order(oid, pickup, delivery, weight=10.0, sp=0, sd=0, tw_d=None, tw_p=None, **kw):
    return Order(oid, Load(1, 0.0, weight), _opts(pickup),
                 delivery, sp, sd, tw_pickup=TimeWindow(*tw_p) if tw_p else None,
                 tw_delivery=TimeWindow(*tw_d) if tw_d else None, **kw)


def instance(points: dict, vehicles, orders, pauses=(), speed=1.0, **kw):
    locs = tuple(Location(k, float(x), float(y)) for k, (x, y) in points.items())
    prs = tuple(PauseRule(TimeWindow(a, b), b - a) for a, b in pauses)
    return Instance(locs, tuple(vehicles), tuple(orders), pause_rules=prs,
                    distance_source={"kind": "euclidean", "speed_mps": speed}, **kw)


def pauses_rules(windows=PAUSES):
    return tuple(PauseRule(TimeWindow(a, b), b - a) for a, b in windows)


def rand_pd(seed, n_orders=4, n_veh=1, tw=True, pauses=False):
    """Random pickup-and-delivery instance in a 50 km square with a central depot."""
    rng = random.Random(seed)
    locs = [Location("depot", 25000, 25000)]
    orders = []
    for i in range(n_orders):
        locs.append(Location(f"p{i}", rng.uniform(0, 50000), rng.uniform(0, 50000)))
        locs.append(Location(f"d{i}", rng.uniform(0, 50000), rng.uniform(0, 50000)))
        w = None
        if tw and rng.random() < 0.5:
            s = rng.randrange(8 * 3600, 14 * 3600, 60)
            w = TimeWindow(s, s + rng.choice([3600, 7200]))
        orders.append(Order(f"o{i}", Load(1, 0.5, rng.randint(50, 300)), (f"p{i}",), f"d{i}", 300, 300,
                            tw_delivery=w))
    vs = [Vehicle(f"v{k}", Load(100, 20, 3000), ("depot",), ("depot",), TimeWindow(6 * 3600, 8 * 3600),
                  22 * 3600, 14 * 3600) for k in range(n_veh)]
    return Instance(tuple(locs), tuple(vs), tuple(orders),
                    pause_rules=pauses_rules() if pauses else ())


def rand_chain_case(seed, n_orders=3, pause_windows=PAUSES, buffer_max=600, split_p=0.3):
    """One vehicle, a random precedence-valid chain and the arrays an oracle needs."""
    from rvrp.distance import matrix_for
    from rvrp.model import StopVisit

    rng = random.Random(seed)
    pts = {"depot": (0, 0)}
    orders = []
    for i in range(n_orders):
        pts[f"p{i}"] = (rng.uniform(0, 30000), rng.uniform(0, 30000))
        pts[f"d{i}"] = (rng.uniform(0, 30000), rng.uniform(0, 30000))
        w = None
        if rng.random() < 0.7:
            s = rng.randrange(8 * 3600, 15 * 3600, 60)
            w = (s, s + rng.choice([600, 1800, 3600]))
        orders.append(order(f"o{i}", f"p{i}", f"d{i}", sp=rng.choice([0, 300, 900, 1500]),
                            sd=rng.choice([0, 300, 900, 2400]), tw_d=w,
                            split_allowed=rng.random() < split_p))
    t_lo = rng.randrange(7 * 3600, 13 * 3600, 60)
    v = vehicle(window=(t_lo, t_lo + rng.randrange(0, buffer_max + 1)),
                can_wait=rng.random() < 0.8)
    inst = instance(pts, [v], orders, pauses=pause_windows, speed=13.89)
    seq = list(range(2 * n_orders))
    rng.shuffle(seq)
    seen = set()
    for k, s in enumerate(seq):  # swap a delivery behind its pickup
        if s & 1 and s - 1 not in seen:
            j = seq.index(s - 1)
            seq[k], seq[j] = seq[j], seq[k]
            s = seq[k]
        seen.add(s)
    chain = [StopVisit(2 * n_orders)] + [StopVisit(s) for s in seq] + [StopVisit(2 * n_orders + 1)]
    m = matrix_for(inst)
    locs = ["depot"] + [f"p{s >> 1}" if s % 2 == 0 else f"d{s >> 1}" for s in seq] + ["depot"]
    legs = [m.t(locs[i], locs[i + 1]) for i in range(len(locs) - 1)]
    serv, tws, twe, split = [], [], [], []
    for s in seq:
        o = orders[s >> 1]
        serv.append(o.service_duration_delivery if s & 1 else o.service_duration_pickup)
        tw = o.tw_delivery if s & 1 else o.tw_pickup
        tws.append(tw.start if tw else 0)
        twe.append(tw.end if tw else 1 << 40)
        split.append(o.split_allowed)
    arrays = dict(legs=legs, serv=serv, tws=tws, twe=twe, split=split, can_wait=v.can_wait,
                  t_lo=v.tour_start_window.start, t_hi=v.tour_start_window.end)
    return inst, m, chain, arrays
