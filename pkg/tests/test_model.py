import itertools
import json

import pytest

from helpers import instance, order, vehicle
from rvrp.model import (Driver, Instance, Solution, StopKind, StopVisit, assign_drivers,
                        dump_instance, expand_stops, format_time, instance_from_dict,
                        instance_to_dict, load_instance, order_driver_faults, parse_time,
                        solution_from_dict, solution_to_dict, validate_instance)

PTS = {"depot": (0, 0), "a": (100, 0), "b": (200, 0)}


def one_order(**kw):
    return instance(PTS, [vehicle()], [order("o0", "depot", "a", **kw)])


def test_valid_instance_has_no_errors():
    assert validate_instance(one_order()) == []


def test_missing_location_is_one_unresolved_reference():
    inst = instance(PTS, [vehicle()], [order("o0", "depot", "nowhere")])
    errs = validate_instance(inst)
    assert [e.kind for e in errs] == ["unresolved-reference"]


def test_colocation_contradiction():
    inst = instance(PTS, [vehicle()], [
        order("o0", "depot", "a", colocated_with=frozenset({"o1"}), not_colocated_with=frozenset({"o1"})),
        order("o1", "depot", "b"),
    ])
    assert [e.kind for e in validate_instance(inst)] == ["contradiction"]


@pytest.mark.parametrize("bad", [
    dict(vehicles=[]),
    dict(orders=[]),
])
def test_empty_fleet_or_order_list_is_invalid(bad):
    args = dict(vehicles=[vehicle()], orders=[order("o0", "depot", "a")]) | bad
    inst = instance(PTS, args["vehicles"], args["orders"])
    assert [e.kind for e in validate_instance(inst)] == ["invariant"]


def test_pause_must_fill_window():
    from rvrp.model import PauseRule, TimeWindow
    inst = one_order()
    inst = Instance(inst.locations, inst.vehicles, inst.orders,
                    pause_rules=(PauseRule(TimeWindow(100, 200), 50),))
    assert [e.kind for e in validate_instance(inst)] == ["invariant"]


def test_expand_ten_orders_one_vehicle():
    orders = [order(f"o{i}", "depot", "a") for i in range(10)]
    stops = expand_stops(instance(PTS, [vehicle()], orders))
    kinds = [s.kind for s in stops]
    assert kinds.count(StopKind.PICKUP) == kinds.count(StopKind.DELIVERY) == 10
    assert kinds[20:] == [StopKind.TOUR_BEGIN, StopKind.TOUR_END]
    assert len(stops) == 22


def test_expand_no_orders_two_vehicles():
    stops = expand_stops(instance(PTS, [vehicle("v0"), vehicle("v1")], []))
    assert [s.kind for s in stops] == [StopKind.TOUR_BEGIN, StopKind.TOUR_END] * 2


def test_expand_multi_option_pickups():
    orders = [order(f"o{i}", ("depot", "b"), "a") for i in range(3)]
    stops = expand_stops(instance(PTS, [vehicle()], orders))
    order_stops = [s for s in stops if s.order is not None]
    assert len(order_stops) == 6
    for s in order_stops:
        if s.kind == StopKind.PICKUP:
            assert s.options == ("depot", "b")
        else:
            assert s.options == ("a",)


def test_expand_is_stable():
    inst = one_order()
    assert [s.id for s in expand_stops(inst)] == [s.id for s in expand_stops(inst)]


def _drivers_inst(drivers, **order_kw):
    inst = one_order(**order_kw)
    return Instance(inst.locations, inst.vehicles, inst.orders, drivers=tuple(drivers))


CHAIN = [StopVisit(2), StopVisit(0), StopVisit(1), StopVisit(3)]


def test_unconstrained_chain_gets_one_driver():
    inst = _drivers_inst([Driver("d1"), Driver("d2")])
    assert assign_drivers(inst, CHAIN, "v0") == (["d1"], 0)


def test_missing_certificate_is_one_fault():
    drivers = [Driver("d1", frozenset({"hazmat"})), Driver("d2")]
    inst = _drivers_inst(drivers, required_certificates=frozenset({"firearm"}))
    team, faults = assign_drivers(inst, CHAIN, "v0")
    assert len(team) == 1 and faults == 1
    # no single driver or pair could have done better
    best = min(order_driver_faults(list(inst.orders), list(t))
               for k in (1, 2) for t in itertools.combinations(drivers, k))
    assert best == 1


def test_codriver_order_gets_two_drivers():
    inst = _drivers_inst([Driver("d1"), Driver("d2")], needs_codriver=True)
    team, faults = assign_drivers(inst, CHAIN, "v0")
    assert sorted(team) == ["d1", "d2"] and faults == 0


def test_used_drivers_are_not_reassigned():
    inst = _drivers_inst([Driver("d1")])
    used = set()
    assert assign_drivers(inst, CHAIN, "v0", used) == (["d1"], 0)
    team, faults = assign_drivers(inst, CHAIN, "v0", used)
    assert team == [] and faults >= 1


def test_parse_and_format_time():
    assert parse_time("09:30") == 34200
    assert parse_time("14:30:15") == 52215
    assert parse_time(600) == 600
    assert format_time(34200) == "09:30:00"
    with pytest.raises(ValueError):
        parse_time("9h30")


def test_instance_json_round_trip(tmp_path):
    inst = one_order(tw_d=(3600, 7200))
    path = tmp_path / "inst.json"
    dump_instance(inst, path)
    assert load_instance(path) == inst
    assert instance_to_dict(load_instance(path)) == instance_to_dict(inst)


def test_instance_accepts_clock_strings():
    data = instance_to_dict(one_order())
    data["vehicles"][0]["tour_start_window"] = {"start": "06:00", "end": "08:00"}
    data["orders"][0]["tw_delivery"] = ["10:00", "11:30"]
    inst = instance_from_dict(json.loads(json.dumps(data)))
    assert inst.vehicles[0].tour_start_window.end == 8 * 3600
    assert inst.orders[0].tw_delivery.start == 36000


def test_solution_json_round_trip():
    inst = one_order()
    sol = Solution({"v0": list(CHAIN)}, {"v0": ["d1"]})
    data = solution_to_dict(inst, sol)
    assert data["chains"]["v0"][1] == ["o0:P", 0]
    back = solution_from_dict(inst, json.loads(json.dumps(data)))
    assert back.chains == sol.chains and back.drivers == sol.drivers
