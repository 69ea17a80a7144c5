"""Index-based view of an instance + matrix used by all solvers.

Everything is flattened to lists of ints so the hot scoring loops avoid
attribute lookups and id dictionaries.
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Optional

from .distance import TravelMatrix
from .model import Instance, Order, StopKind, StopVisit, Vehicle, expand_stops

NO_TW_START = -1
NO_TW_END = 1 << 40


def order_vehicle_faults(o: Order, v: Vehicle) -> int:
    """Order restrictions broken by carrying ``o`` on ``v`` (drivers excluded)."""
    f = 0
    if o.required_vehicle_group is not None and o.required_vehicle_group not in v.groups:
        f += 1
    if o.hazardous and not v.hazmat_capable:
        f += 1
    if o.max_vehicle_dims is not None and v.dims.exceeds(o.max_vehicle_dims):
        f += 1
    if o.lorry_only and not v.lorry:
        f += 1
    return f


class Problem:
    def __init__(self, inst: Instance, matrix: Optional[TravelMatrix]):
        self.inst = inst
        self.matrix = matrix
        self.stops = expand_stops(inst)
        self.n_orders = no = len(inst.orders)
        self.n_vehicles = nv = len(inst.vehicles)
        self.n_order_stops = 2 * no
        if matrix is None:
            # structural scoring only (no travel data)
            idx = {loc.id: i for i, loc in enumerate(inst.locations)}
            self.dist = self.time = None
        else:
            idx = matrix.index
            missing = [loc.id for loc in inst.locations if loc.id not in idx]
            if missing:
                raise KeyError(f"matrix lacks locations {missing[:5]}")
            self.dist = [list(r) for r in matrix.dist]
            self.time = [list(r) for r in matrix.time]
        self.vehicle_index = {v.id: i for i, v in enumerate(inst.vehicles)}
        self.order_index = {o.id: i for i, o in enumerate(inst.orders)}

        self.opts: list[tuple[int, ...]] = [tuple(idx[l] for l in s.options) for s in self.stops]
        self.service = [s.service_duration for s in self.stops]
        self.tw_s = [s.tw.start if s.tw else NO_TW_START for s in self.stops]
        self.tw_e = [s.tw.end if s.tw else NO_TW_END for s in self.stops]
        self.has_tw = [s.tw is not None for s in self.stops]
        self.split = [s.split_allowed for s in self.stops]
        self.flm = [s.fast_loading_modifier for s in self.stops]
        self.is_pickup = [s.kind == StopKind.PICKUP for s in self.stops]

        # per-stop load delta in (pieces, liters, kg)
        self.delta: list[tuple[int, int, int]] = []
        for o in inst.orders:
            u = o.demand.as_units()
            self.delta.append(u)
            self.delta.append((-u[0], -u[1], -u[2]))
        self.demand = [self.delta[2 * i] for i in range(no)]

        self.cap = [v.capacity.as_units() for v in inst.vehicles]
        self.trailer_caps = [t.capacity.as_units() for t in inst.trailers]
        self.begin_stop = [2 * no + 2 * k for k in range(nv)]
        self.end_stop = [2 * no + 2 * k + 1 for k in range(nv)]
        self.start_locs = [frozenset(self.opts[b]) for b in self.begin_stop]
        self.end_locs = [frozenset(self.opts[e]) for e in self.end_stop]

        self.pauses = sorted((p.window.start, p.window.end) for p in inst.pause_rules)
        # service time per (vehicle, stop) with the fast loading speed-up applied
        self.vservice = []
        for v in inst.vehicles:
            if v.fast_loading:
                self.vservice.append([int(d * (1.0 - m) + 0.5) for d, m in zip(self.service, self.flm)])
            else:
                self.vservice.append(self.service)

        self.compat_faults = [[order_vehicle_faults(o, v) for v in inst.vehicles] for o in inst.orders]
        self.required_vehicle = [self.vehicle_index.get(o.required_vehicle) if o.required_vehicle else None
                                 for o in inst.orders]
        self.colocated: list[tuple[int, int]] = []
        self.separated: list[tuple[int, int]] = []
        for pairs, attr in ((self.colocated, "colocated_with"), (self.separated, "not_colocated_with")):
            seen = set()
            for i, o in enumerate(inst.orders):
                for ref in getattr(o, attr):
                    j = self.order_index.get(ref)
                    if j is None or j == i:
                        continue
                    key = (min(i, j), max(i, j))
                    if key not in seen:
                        seen.add(key)
                        pairs.append(key)
        self.has_driver_rules = bool(inst.drivers) or any(
            o.needs_codriver or o.required_driver or o.required_certificates for o in inst.orders)

        # fast-path flags
        self.multi_option = [len(o) > 1 for o in self.opts]
        depots = _depots(inst)
        # orders picked up away from every fleet start/end location
        self.is_pd_order = [not any(loc in depots for loc in o.pickup_options) for o in inst.orders]
        self.n_pd_orders = sum(self.is_pd_order)

    # -- helpers -----------------------------------------------------------

    def order_of(self, stop: int) -> int:
        return stop >> 1

    def loc(self, sv: StopVisit) -> int:
        return self.opts[sv.stop][sv.option]

    def allowed(self, order: int, v: int) -> bool:
        rv = self.required_vehicle[order]
        return self.compat_faults[order][v] == 0 and (rv is None or rv == v)

    def empty_chain(self, v: int) -> list[StopVisit]:
        return [StopVisit(self.begin_stop[v], 0), StopVisit(self.end_stop[v], 0)]

    def nearest_option(self, stop: int, from_loc: int) -> int:
        opts = self.opts[stop]
        if len(opts) == 1:
            return 0
        row = self.dist[from_loc]
        return min(range(len(opts)), key=lambda k: row[opts[k]])


def _depots(inst: Instance) -> frozenset[str]:
    return frozenset(l for v in inst.vehicles for l in (*v.start_options, *v.end_options))


_CACHE: "OrderedDict[tuple[int, int], tuple[Instance, TravelMatrix, Problem]]" = OrderedDict()


def get_problem(inst: Instance, matrix: Optional[TravelMatrix]) -> Problem:
    """Compiled view, cached for the last few (instance, matrix) pairs."""
    key = (id(inst), id(matrix))
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is inst and hit[1] is matrix:
        _CACHE.move_to_end(key)
        return hit[2]
    pb = Problem(inst, matrix)
    _CACHE[key] = (inst, matrix, pb)
    while len(_CACHE) > 8:
        _CACHE.popitem(last=False)
    return pb
