import json

import pytest

from kitchencell.model import (
    Assignment,
    EventKind,
    Gate,
    KitchenEvent,
    Machine,
    Order,
    Schedule,
    TaskSpec,
    TaskStatus,
    check_schedule,
    compute_ranks,
    schedule_from_assignments,
    validate_order,
)


def spec(i, j, machine, dur, **kw):
    return TaskSpec(
        recipe_index=i, task_index=j, machine=machine, duration_s=dur, **kw
    )


def test_machine_capacity_must_be_one():
    with pytest.raises(ValueError):
        Machine(id="m", capacity=2)


def test_tend_machine_must_differ():
    with pytest.raises(ValueError):
        spec(0, 0, "m", 10, tend_machine="m")


def test_validate_order_reports_all_problems(machines):
    order = Order(
        recipe_index=0,
        name="bad",
        tasks=(
            spec(0, 0, "cooktop", 10),
            TaskSpec(recipe_index=0, task_index=1, machine="nope", duration_s=0),
        ),
    )
    problems = validate_order(order, machines)
    assert "nonpositive duration (i=0,j=1)" in problems
    assert "unknown machine nope" in problems


def test_validate_order_accepts_sample_orders(machines, orders):
    for order in orders:
        assert validate_order(order, machines) == []


def test_ranks_are_a_permutation_by_start_time():
    assignments = (
        Assignment(0, 0, "a", 5, 10),
        Assignment(0, 1, "b", 10, 12),
        Assignment(1, 0, "c", 0, 4),
        Assignment(1, 1, "a", 20, 22, status=TaskStatus.CANCELED),
    )
    ranks = compute_ranks(assignments)
    assert ranks == {(1, 0): 0, (0, 0): 1, (0, 1): 2}


def test_schedule_from_assignments_makespan_skips_canceled():
    sched = schedule_from_assignments(
        [
            Assignment(0, 0, "a", 0, 10, status=TaskStatus.DONE),
            Assignment(0, 1, "b", 10, 30),
            Assignment(1, 0, "c", 0, 99, status=TaskStatus.CANCELED),
        ]
    )
    assert sched.makespan_s == 30


def order_of(*tasks, recipe_index=0, deadline=None):
    return Order(
        recipe_index=recipe_index,
        name=f"o{recipe_index}",
        tasks=tuple(tasks),
        deadline_s=deadline,
    )


def test_check_schedule_detects_each_constraint_family():
    ms = [Machine("a"), Machine("b"), Machine("c")]
    o0 = order_of(spec(0, 0, "a", 10), spec(0, 1, "b", 10), deadline=15)
    o1 = order_of(spec(1, 0, "a", 10, tend_machine="c"), recipe_index=1)
    # precedence violation: (0,1) starts before (0,0) ends
    sched = schedule_from_assignments(
        [
            Assignment(0, 0, "a", 0, 10),
            Assignment(0, 1, "b", 5, 15),
            Assignment(1, 0, "a", 30, 40),
        ]
    )
    v = check_schedule([o0, o1], ms, [], sched)
    assert any("precedence" in s for s in v)

    # machine overlap (including via tend machine)
    sched = schedule_from_assignments(
        [
            Assignment(0, 0, "a", 0, 10),
            Assignment(0, 1, "b", 10, 20),
            Assignment(1, 0, "a", 5, 15),
        ]
    )
    v = check_schedule([o0, o1], ms, [], sched)
    assert any("overlap on machine a" in s for s in v)

    # concurrence violation
    o2 = order_of(spec(0, 0, "a", 10), deadline=None)
    o3 = order_of(spec(1, 0, "b", 10), recipe_index=1)
    sched = schedule_from_assignments(
        [Assignment(0, 0, "a", 0, 10), Assignment(1, 0, "b", 5, 15)]
    )
    v = check_schedule([o2, o3], ms, [frozenset({"a", "b"})], sched)
    assert any("concurrence" in s for s in v)

    # deadline violation: first start 0, last end 40 > 15
    sched = schedule_from_assignments(
        [
            Assignment(0, 0, "a", 0, 10),
            Assignment(0, 1, "b", 30, 40),
            Assignment(1, 0, "a", 50, 60),
        ]
    )
    v = check_schedule([o0, o1], ms, [], sched)
    assert any("deadline" in s for s in v)


def test_check_schedule_order_completion_chain():
    ms = [Machine("a"), Machine("b")]
    o0 = order_of(spec(0, 0, "a", 10))
    o1 = order_of(spec(1, 0, "b", 10), recipe_index=1)
    # order 1 finishes before (or with) order 0: chain violated
    sched = schedule_from_assignments(
        [Assignment(0, 0, "a", 5, 15), Assignment(1, 0, "b", 0, 10)]
    )
    v = check_schedule([o0, o1], ms, [], sched)
    assert v
    # strictly increasing completion is fine
    sched = schedule_from_assignments(
        [Assignment(0, 0, "a", 0, 10), Assignment(1, 0, "b", 5, 15)]
    )
    assert check_schedule([o0, o1], ms, [], sched) == []


def test_feasible_schedule_passes(machines, incompatible_pairs, orders):
    sched = schedule_from_assignments(
        [
            Assignment(0, 0, "spice_dispenser", 0, 60),
            Assignment(0, 1, "broiler", 60, 240),
            Assignment(0, 2, "cooktop", 240, 480),
            Assignment(0, 3, "oven", 480, 600),
            Assignment(0, 4, "left_arm", 600, 660),
            Assignment(1, 0, "food_processor", 0, 120),
            Assignment(1, 1, "fryer", 120, 420),
            Assignment(1, 2, "spice_dispenser", 420, 480),
            Assignment(1, 3, "right_arm", 601, 661),
        ]
    )
    assert check_schedule(orders, machines, incompatible_pairs, sched) == []


def test_event_line_is_compact_sorted_json():
    ev = KitchenEvent(
        at_s=1.23456789,
        kind=EventKind.TASK_STARTED,
        payload={"b": 1, "a": 2},
        seq=7,
    )
    line = ev.to_line()
    doc = json.loads(line)
    assert doc["at_s"] == 1.234568  # rounded to 6 places
    assert list(doc.keys()) == sorted(doc.keys())
    assert doc["seq"] == 7
