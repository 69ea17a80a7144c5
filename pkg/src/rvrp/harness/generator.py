"""Synthetic instances in eight fixed shapes (order count, fleet size, PD, pauses).

Every output is synthetic; ``Instance.name`` carries the shape and seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..model import (Instance, Load, Location, Order, PauseRule, TimeWindow, Vehicle)

SQUARE_M = 50_000
SPEED_MPS = 13.89
PAUSE_WINDOWS = ((34200, 36000), (41400, 43200), (52200, 54000))
FILL = 0.7  # target share of fleet weight capacity


@dataclass(frozen=True)
class Shape:
    orders: int
    vehicles: int
    pd: bool = False
    pauses: bool = False


SHAPES = {
    "TSP-I": Shape(10, 1),
    "TSP-II": Shape(30, 1),
    "TSP-II-P": Shape(30, 1, pauses=True),
    "VRP-I": Shape(53, 5),
    "VRP-I-P": Shape(53, 5, pauses=True),
    "VRP-II": Shape(100, 13),
    "TSP-PD": Shape(10, 1, pd=True),
    "VRP-PD-P": Shape(62, 7, pd=True, pauses=True),
}

VEHICLE_CAP = Load(pieces=120, volume=24.0, weight=4000.0)


def first_fit(weights, n_bins: int, cap: float) -> bool:
    """Greedy first-fit in descending weight order."""
    bins = [0.0] * n_bins
    for w in sorted(weights, reverse=True):
        for i, b in enumerate(bins):
            if b + w <= cap:
                bins[i] = b + w
                break
        else:
            return False
    return True


def _weights(rng: random.Random, n: int, n_veh: int) -> list[int]:
    raw = [rng.uniform(1.0, 5.0) for _ in range(n)]
    k = FILL * n_veh * VEHICLE_CAP.weight / sum(raw)
    while True:
        ws = [max(1, int(r * k)) for r in raw]
        if first_fit(ws, n_veh, VEHICLE_CAP.weight):
            return ws
        k *= 0.95


def _point(rng: random.Random) -> tuple[float, float]:
    return float(rng.randrange(SQUARE_M + 1)), float(rng.randrange(SQUARE_M + 1))


def generate_instance(shape: str, seed: int) -> Instance:
    try:
        sh = SHAPES[shape]
    except KeyError:
        raise ValueError(f"unknown shape {shape!r}; expected one of {sorted(SHAPES)}") from None
    rng = random.Random(f"{shape}:{seed}")
    locs = [Location("depot", *_point(rng))]
    weights = _weights(rng, sh.orders, sh.vehicles)
    orders = []
    for i, w in enumerate(weights):
        cust = f"c{i}"
        locs.append(Location(cust, *_point(rng)))
        pickup = "depot"
        if sh.pd:
            pickup = f"p{i}"
            locs.append(Location(pickup, *_point(rng)))
        start = rng.randrange(8 * 3600, 15 * 3600 + 1, 900)
        tw = TimeWindow(start, start + rng.choice((3, 4, 5)) * 3600)
        orders.append(Order(
            id=f"o{i}", demand=Load(1, round(w / 250, 3), float(w)),
            pickup_options=(pickup,), delivery_location=cust,
            service_duration_pickup=300 if sh.pd else 120, service_duration_delivery=300,
            tw_delivery=tw,
        ))
    vehicles = tuple(
        Vehicle(f"v{k}", VEHICLE_CAP, ("depot",), ("depot",), TimeWindow(6 * 3600, 8 * 3600),
                tour_end_limit=21 * 3600, max_tour_duration=13 * 3600)
        for k in range(sh.vehicles))
    pauses = tuple(PauseRule(TimeWindow(a, b), b - a) for a, b in PAUSE_WINDOWS) if sh.pauses else ()
    return Instance(tuple(locs), vehicles, tuple(orders), pause_rules=pauses,
                    distance_source={"kind": "euclidean", "speed_mps": SPEED_MPS},
                    name=f"{shape}-s{seed}")
