"""Domain types for the rich VRP.

Times are integer seconds since midnight of the planning day, distances
integer meters. All types are frozen; an :class:`Instance` can be shared
freely between solver workers.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

DAY = 86400
MAX_TIME = 2 * DAY


class StopKind(str, enum.Enum):
    PICKUP = "Pickup"
    DELIVERY = "Delivery"
    TOUR_BEGIN = "TourBegin"
    TOUR_END = "TourEnd"
    PAUSE = "Pause"


@dataclass(frozen=True)
class Location:
    id: str
    x: float
    y: float


@dataclass(frozen=True)
class TimeWindow:
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class PauseRule:
    window: TimeWindow
    duration: int


@dataclass(frozen=True)
class Load:
    """Capacity or demand in pieces, cubic meters and kilograms."""

    pieces: int = 0
    volume: float = 0.0
    weight: float = 0.0

    def as_units(self) -> tuple[int, int, int]:
        # volume in liters so the three magnitudes are comparable integers
        return (int(self.pieces), int(round(self.volume * 1000)), int(round(self.weight)))


@dataclass(frozen=True)
class Dims:
    h: float = 0.0
    w: float = 0.0
    l: float = 0.0
    weight: float = 0.0

    def exceeds(self, limit: "Dims") -> bool:
        return (self.h > limit.h or self.w > limit.w or self.l > limit.l
                or self.weight > limit.weight)


@dataclass(frozen=True)
class CostRates:
    per_hour: float = 0.0
    per_km: float = 0.0
    per_tour: float = 0.0
    per_stop: float = 0.0


@dataclass(frozen=True)
class Vehicle:
    id: str
    capacity: Load
    start_options: tuple[str, ...]
    end_options: tuple[str, ...]
    tour_start_window: TimeWindow
    tour_end_limit: int
    max_tour_duration: int
    dims: Dims = Dims()
    cost_rates: CostRates = CostRates()
    trailer_allowed: bool = False
    hazmat_capable: bool = False
    fast_loading: bool = False
    can_wait: bool = True
    allow_return: bool = True
    lorry: bool = True
    groups: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Trailer:
    id: str
    capacity: Load
    dims: Dims = Dims()


@dataclass(frozen=True)
class Driver:
    id: str
    certificates: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Order:
    id: str
    demand: Load
    pickup_options: tuple[str, ...]
    delivery_location: str
    service_duration_pickup: int = 0
    service_duration_delivery: int = 0
    tw_pickup: Optional[TimeWindow] = None
    tw_delivery: Optional[TimeWindow] = None
    needs_codriver: bool = False
    required_driver: Optional[str] = None
    required_certificates: frozenset[str] = frozenset()
    colocated_with: frozenset[str] = frozenset()
    not_colocated_with: frozenset[str] = frozenset()
    max_vehicle_dims: Optional[Dims] = None
    required_vehicle_group: Optional[str] = None
    required_vehicle: Optional[str] = None
    hazardous: bool = False
    lorry_only: bool = False
    split_allowed: bool = False
    fast_loading_modifier: float = 0.0


@dataclass(frozen=True)
class Stop:
    id: str
    order: Optional[str]
    kind: StopKind
    options: tuple[str, ...]
    service_duration: int = 0
    tw: Optional[TimeWindow] = None
    split_allowed: bool = False
    fast_loading_modifier: float = 0.0
    vehicle: Optional[str] = None


class StopVisit(NamedTuple):
    """One scheduled visit: index into ``expand_stops(inst)`` plus chosen option."""

    stop: int
    option: int = 0


@dataclass
class Solution:
    """Per-vehicle chains, each bracketed by TourBegin/TourEnd visits."""

    chains: dict[str, list[StopVisit]]
    drivers: dict[str, list[str]] = field(default_factory=dict)

    def copy(self) -> "Solution":
        return Solution({v: list(c) for v, c in self.chains.items()},
                        {v: list(d) for v, d in self.drivers.items()})


@dataclass(frozen=True)
class Instance:
    locations: tuple[Location, ...]
    vehicles: tuple[Vehicle, ...]
    orders: tuple[Order, ...]
    trailers: tuple[Trailer, ...] = ()
    drivers: tuple[Driver, ...] = ()
    pause_rules: tuple[PauseRule, ...] = ()
    max_runtime: int = 300
    distance_source: dict = field(default_factory=lambda: {"kind": "euclidean", "speed_mps": 13.89},
                                  compare=False, hash=False)
    name: str = ""

    def location(self, loc_id: str) -> Location:
        for loc in self.locations:
            if loc.id == loc_id:
                return loc
        raise KeyError(loc_id)


@dataclass(frozen=True)
class ValidationError:
    kind: str  # "unresolved-reference" | "contradiction" | "invariant"
    message: str


def validate_instance(inst: Instance) -> list[ValidationError]:
    """Check type invariants and cross-references; an empty list means valid."""
    errors: list[ValidationError] = []

    def bad(kind, msg):
        errors.append(ValidationError(kind, msg))

    def check_tw(tw: Optional[TimeWindow], what: str):
        if tw is not None and not (0 <= tw.start <= tw.end <= MAX_TIME):
            bad("invariant", f"{what}: time window {tw.start}..{tw.end} out of range")

    def check_load(load: Load, what: str):
        if load.pieces < 0 or load.volume < 0 or load.weight < 0:
            bad("invariant", f"{what}: negative load component")

    def dupes(ids: Iterable[str], what: str):
        seen = set()
        for i in ids:
            if i in seen:
                bad("invariant", f"duplicate {what} id {i!r}")
            seen.add(i)

    loc_ids = {loc.id for loc in inst.locations}
    dupes((loc.id for loc in inst.locations), "location")
    dupes((v.id for v in inst.vehicles), "vehicle")
    dupes((o.id for o in inst.orders), "order")
    dupes((d.id for d in inst.drivers), "driver")
    dupes((t.id for t in inst.trailers), "trailer")

    for loc in inst.locations:
        if not (math.isfinite(loc.x) and math.isfinite(loc.y)):
            bad("invariant", f"location {loc.id}: non-finite coordinate")

    if not inst.vehicles:
        bad("invariant", "instance has no vehicles")
    if not inst.orders:
        bad("invariant", "instance has no orders")

    for v in inst.vehicles:
        check_load(v.capacity, f"vehicle {v.id}")
        check_tw(v.tour_start_window, f"vehicle {v.id}")
        if v.max_tour_duration <= 0:
            bad("invariant", f"vehicle {v.id}: max_tour_duration must be positive")
        if not v.start_options or not v.end_options:
            bad("invariant", f"vehicle {v.id}: start/end options must be non-empty")
        for loc in (*v.start_options, *v.end_options):
            if loc not in loc_ids:
                bad("unresolved-reference", f"vehicle {v.id}: unknown location {loc!r}")

    for t in inst.trailers:
        check_load(t.capacity, f"trailer {t.id}")

    order_ids = {o.id for o in inst.orders}
    driver_ids = {d.id for d in inst.drivers}
    vehicle_ids = {v.id for v in inst.vehicles}
    for o in inst.orders:
        check_load(o.demand, f"order {o.id}")
        check_tw(o.tw_pickup, f"order {o.id} pickup")
        check_tw(o.tw_delivery, f"order {o.id} delivery")
        if not o.pickup_options:
            bad("invariant", f"order {o.id}: pickup_options must be non-empty")
        for loc in (*o.pickup_options, o.delivery_location):
            if loc not in loc_ids:
                bad("unresolved-reference", f"order {o.id}: unknown location {loc!r}")
        if o.required_driver is not None and o.required_driver not in driver_ids:
            bad("unresolved-reference", f"order {o.id}: unknown driver {o.required_driver!r}")
        if o.required_vehicle is not None and o.required_vehicle not in vehicle_ids:
            bad("unresolved-reference", f"order {o.id}: unknown vehicle {o.required_vehicle!r}")
        for ref in (*o.colocated_with, *o.not_colocated_with):
            if ref not in order_ids:
                bad("unresolved-reference", f"order {o.id}: unknown order {ref!r}")
        both = o.colocated_with & o.not_colocated_with
        if both:
            bad("contradiction", f"order {o.id}: {sorted(both)} both co-located and not co-located")
        if not 0.0 <= o.fast_loading_modifier <= 1.0:
            bad("invariant", f"order {o.id}: fast_loading_modifier outside [0, 1]")

    for p in inst.pause_rules:
        check_tw(p.window, "pause rule")
        if p.duration != p.window.length:
            bad("invariant", f"pause {p.window.start}..{p.window.end}: duration must fill the window")
    return errors


def expand_stops(inst: Instance) -> list[Stop]:
    """Pickup and delivery stop per order, then TourBegin/TourEnd per vehicle.

    Stop ``2*i`` is the pickup and ``2*i + 1`` the delivery of order ``i``;
    the tour stops of vehicle ``k`` follow at ``2*|orders| + 2*k (+1)``.
    """
    stops: list[Stop] = []
    for o in inst.orders:
        stops.append(Stop(f"{o.id}:P", o.id, StopKind.PICKUP, tuple(o.pickup_options),
                          o.service_duration_pickup, o.tw_pickup, o.split_allowed,
                          o.fast_loading_modifier))
        stops.append(Stop(f"{o.id}:D", o.id, StopKind.DELIVERY, (o.delivery_location,),
                          o.service_duration_delivery, o.tw_delivery, o.split_allowed,
                          o.fast_loading_modifier))
    for v in inst.vehicles:
        stops.append(Stop(f"{v.id}:B", None, StopKind.TOUR_BEGIN, tuple(v.start_options),
                          vehicle=v.id))
        stops.append(Stop(f"{v.id}:E", None, StopKind.TOUR_END, tuple(v.end_options),
                          vehicle=v.id))
    return stops


def order_driver_faults(orders: list[Order], team: list[Driver]) -> int:
    """Requirements of ``orders`` the driver ``team`` leaves unmet (one per order and kind)."""
    ids = {d.id for d in team}
    certs = set().union(*(d.certificates for d in team)) if team else set()
    faults = 0
    for o in orders:
        if o.needs_codriver and len(team) < 2:
            faults += 1
        if o.required_driver is not None and o.required_driver not in ids:
            faults += 1
        if not o.required_certificates <= certs:
            faults += 1
    return faults


def chain_orders(inst: Instance, chain) -> list[Order]:
    """Orders with at least one stop on ``chain`` (first-visit order)."""
    n = 2 * len(inst.orders)
    seen: dict[int, None] = {}
    for sv in chain:
        if sv.stop < n:
            seen.setdefault(sv.stop // 2)
    return [inst.orders[i] for i in seen]


def assign_drivers(inst: Instance, chain, vehicle: str,
                   used: Optional[set[str]] = None) -> tuple[list[str], int]:
    """Greedy first-fit driver selection for the tour of ``vehicle``.

    ``used`` holds drivers already taken by other tours of the same solution
    and is updated in place. Returns the driver ids and the number of order
    requirements the selection leaves unmet.
    """
    return pick_drivers(inst, chain_orders(inst, chain), set() if used is None else used)


def pick_drivers(inst: Instance, orders: list[Order], used: set[str]) -> tuple[list[str], int]:
    if not orders:
        return [], 0
    if not inst.drivers:
        # unmanaged drivers: only explicit requirements can fail
        return [], order_driver_faults(orders, [])

    slots = 2 if any(o.needs_codriver for o in orders) else 1
    by_id = {d.id: d for d in inst.drivers}
    team: list[Driver] = []
    for o in orders:
        rid = o.required_driver
        if rid in by_id and rid not in used and len(team) < 2 and by_id[rid] not in team:
            team.append(by_id[rid])
    needed = set().union(*(o.required_certificates for o in orders))
    free = [d for d in sorted(inst.drivers, key=lambda d: d.id) if d.id not in used and d not in team]
    while len(team) < slots and free:
        have = set().union(*(d.certificates for d in team))
        missing = needed - have
        pick = next((d for d in free if missing <= d.certificates), None)
        if pick is None:
            pick = max(free, key=lambda d: len(missing & d.certificates))
        team.append(pick)
        free.remove(pick)
    used.update(d.id for d in team)
    faults = order_driver_faults(orders, team)
    if not team:
        faults = max(faults, 1)  # nobody left to drive this tour
    return [d.id for d in team], faults


# ---------------------------------------------------------------- JSON I/O

def parse_time(value) -> int:
    """Seconds since midnight from an int or an ``"HH:MM"``/``"HH:MM:SS"`` string."""
    if isinstance(value, bool):
        raise ValueError(f"not a time: {value!r}")
    if isinstance(value, (int, float)):
        return int(value)
    parts = [int(p) for p in str(value).split(":")]
    if len(parts) not in (2, 3):
        raise ValueError(f"not a time: {value!r}")
    h, m = parts[0], parts[1]
    s = parts[2] if len(parts) == 3 else 0
    return h * 3600 + m * 60 + s


def format_time(seconds: int) -> str:
    return f"{seconds // 3600:02d}:{seconds % 3600 // 60:02d}:{seconds % 60:02d}"


def _tw(d) -> Optional[TimeWindow]:
    if d is None:
        return None
    if isinstance(d, (list, tuple)):
        return TimeWindow(parse_time(d[0]), parse_time(d[1]))
    return TimeWindow(parse_time(d["start"]), parse_time(d["end"]))


def _load(d) -> Load:
    d = d or {}
    return Load(int(d.get("pieces", 0)), float(d.get("volume", 0.0)), float(d.get("weight", 0.0)))


def _dims(d) -> Dims:
    d = d or {}
    return Dims(float(d.get("h", 0)), float(d.get("w", 0)), float(d.get("l", 0)),
                float(d.get("weight", 0)))


def instance_from_dict(data: dict) -> Instance:
    locations = tuple(Location(str(l["id"]), float(l.get("x", l.get("lat", 0.0))),
                               float(l.get("y", l.get("lon", 0.0))))
                      for l in data.get("locations", []))
    vehicles = []
    for v in data.get("vehicles", []):
        rates = v.get("cost_rates") or {}
        vehicles.append(Vehicle(
            id=str(v["id"]), capacity=_load(v.get("capacity")),
            start_options=tuple(v["start_options"]), end_options=tuple(v["end_options"]),
            tour_start_window=_tw(v["tour_start_window"]),
            tour_end_limit=parse_time(v.get("tour_end_limit", MAX_TIME)),
            max_tour_duration=parse_time(v.get("max_tour_duration", DAY)),
            dims=_dims(v.get("dims")),
            cost_rates=CostRates(**{k: float(x) for k, x in rates.items()}),
            trailer_allowed=bool(v.get("trailer_allowed", False)),
            hazmat_capable=bool(v.get("hazmat_capable", False)),
            fast_loading=bool(v.get("fast_loading", False)),
            can_wait=bool(v.get("can_wait", True)),
            allow_return=bool(v.get("allow_return", True)),
            lorry=bool(v.get("lorry", True)),
            groups=frozenset(v.get("groups", ())),
        ))
    orders = []
    for o in data.get("orders", []):
        orders.append(Order(
            id=str(o["id"]), demand=_load(o.get("demand")),
            pickup_options=tuple(o["pickup_options"]), delivery_location=str(o["delivery_location"]),
            service_duration_pickup=parse_time(o.get("service_duration_pickup", 0)),
            service_duration_delivery=parse_time(o.get("service_duration_delivery", 0)),
            tw_pickup=_tw(o.get("tw_pickup")), tw_delivery=_tw(o.get("tw_delivery")),
            needs_codriver=bool(o.get("needs_codriver", False)),
            required_driver=o.get("required_driver"),
            required_certificates=frozenset(o.get("required_certificates", ())),
            colocated_with=frozenset(o.get("colocated_with", ())),
            not_colocated_with=frozenset(o.get("not_colocated_with", ())),
            max_vehicle_dims=_dims(o["max_vehicle_dims"]) if o.get("max_vehicle_dims") else None,
            required_vehicle_group=o.get("required_vehicle_group"),
            required_vehicle=o.get("required_vehicle"),
            hazardous=bool(o.get("hazardous", False)),
            lorry_only=bool(o.get("lorry_only", False)),
            split_allowed=bool(o.get("split_allowed", False)),
            fast_loading_modifier=float(o.get("fast_loading_modifier", 0.0)),
        ))
    trailers = tuple(Trailer(str(t["id"]), _load(t.get("capacity")), _dims(t.get("dims")))
                     for t in data.get("trailers", []))
    drivers = tuple(Driver(str(d["id"]), frozenset(d.get("certificates", ())))
                    for d in data.get("drivers", []))
    pauses = []
    for p in data.get("pause_rules", []):
        w = _tw(p.get("window", p))
        pauses.append(PauseRule(w, parse_time(p.get("duration", w.length))))
    return Instance(locations=locations, vehicles=tuple(vehicles), orders=tuple(orders),
                    trailers=trailers, drivers=drivers, pause_rules=tuple(pauses),
                    max_runtime=parse_time(data.get("max_runtime_s", 300)),
                    distance_source=dict(data.get("distance") or {"kind": "euclidean", "speed_mps": 13.89}),
                    name=str(data.get("name", "")))


def _tw_out(tw: Optional[TimeWindow]):
    return None if tw is None else {"start": tw.start, "end": tw.end}


def _load_out(l: Load) -> dict:
    return {"pieces": l.pieces, "volume": l.volume, "weight": l.weight}


def _dims_out(d: Dims) -> dict:
    return {"h": d.h, "w": d.w, "l": d.l, "weight": d.weight}


def instance_to_dict(inst: Instance) -> dict:
    """Canonical JSON form; times as integer seconds, sets as sorted lists."""
    return {
        "name": inst.name,
        "locations": [{"id": l.id, "x": l.x, "y": l.y} for l in inst.locations],
        "vehicles": [{
            "id": v.id, "capacity": _load_out(v.capacity), "dims": _dims_out(v.dims),
            "cost_rates": {"per_hour": v.cost_rates.per_hour, "per_km": v.cost_rates.per_km,
                           "per_tour": v.cost_rates.per_tour, "per_stop": v.cost_rates.per_stop},
            "max_tour_duration": v.max_tour_duration,
            "start_options": list(v.start_options), "end_options": list(v.end_options),
            "tour_start_window": _tw_out(v.tour_start_window), "tour_end_limit": v.tour_end_limit,
            "trailer_allowed": v.trailer_allowed, "hazmat_capable": v.hazmat_capable,
            "fast_loading": v.fast_loading, "can_wait": v.can_wait,
            "allow_return": v.allow_return, "lorry": v.lorry, "groups": sorted(v.groups),
        } for v in inst.vehicles],
        "trailers": [{"id": t.id, "capacity": _load_out(t.capacity), "dims": _dims_out(t.dims)}
                     for t in inst.trailers],
        "drivers": [{"id": d.id, "certificates": sorted(d.certificates)} for d in inst.drivers],
        "orders": [{
            "id": o.id, "demand": _load_out(o.demand), "pickup_options": list(o.pickup_options),
            "delivery_location": o.delivery_location,
            "service_duration_pickup": o.service_duration_pickup,
            "service_duration_delivery": o.service_duration_delivery,
            "tw_pickup": _tw_out(o.tw_pickup), "tw_delivery": _tw_out(o.tw_delivery),
            "needs_codriver": o.needs_codriver, "required_driver": o.required_driver,
            "required_certificates": sorted(o.required_certificates),
            "colocated_with": sorted(o.colocated_with),
            "not_colocated_with": sorted(o.not_colocated_with),
            "max_vehicle_dims": _dims_out(o.max_vehicle_dims) if o.max_vehicle_dims else None,
            "required_vehicle_group": o.required_vehicle_group,
            "required_vehicle": o.required_vehicle,
            "hazardous": o.hazardous, "lorry_only": o.lorry_only,
            "split_allowed": o.split_allowed, "fast_loading_modifier": o.fast_loading_modifier,
        } for o in inst.orders],
        "pause_rules": [{"window": _tw_out(p.window), "duration": p.duration} for p in inst.pause_rules],
        "max_runtime_s": inst.max_runtime,
        "distance": inst.distance_source,
    }


def load_instance(path) -> Instance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def dump_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1, sort_keys=True)
        fh.write("\n")


def solution_to_dict(inst: Instance, sol: Solution) -> dict:
    """Chains as ``[stop_id, option]`` pairs keyed by vehicle id, in instance vehicle order."""
    ids = [s.id for s in expand_stops(inst)]
    return {
        "chains": {v.id: [[ids[sv.stop], sv.option] for sv in sol.chains.get(v.id, [])]
                   for v in inst.vehicles},
        "drivers": {v: list(d) for v, d in sorted(sol.drivers.items())},
    }


def solution_from_dict(inst: Instance, data: dict) -> Solution:
    index = {s.id: i for i, s in enumerate(expand_stops(inst))}
    chains = {v: [StopVisit(index[s], int(k)) for s, k in c] for v, c in data["chains"].items()}
    return Solution(chains, {v: list(d) for v, d in data.get("drivers", {}).items()})
