"""Core domain types shared by the scheduler, replanner, simulator and CLI.

All times are integer seconds in the planning domain.  The simulator runs on
float seconds; the engine quantizes back to whole seconds before anything
re-enters the planner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional

__all__ = [
    "MachineKind",
    "Machine",
    "Gate",
    "TaskSpec",
    "Order",
    "TaskStatus",
    "Assignment",
    "Schedule",
    "EventKind",
    "KitchenEvent",
    "validate_order",
    "check_schedule",
]


class MachineKind(str, Enum):
    OVEN = "oven"
    BROILER = "broiler"
    COOKTOP = "cooktop"
    PASTA_COOKER = "pasta_cooker"
    FRYER = "fryer"
    FOOD_PROCESSOR = "food_processor"
    ROTATING_MIXER = "rotating_mixer"
    SPICE_DISPENSER = "spice_dispenser"
    LEFT_ARM = "left_arm"
    RIGHT_ARM = "right_arm"
    OTHER = "other"


@dataclass(frozen=True)
class Machine:
    """A unit-capacity resource (appliance or arm)."""

    id: str
    kind: MachineKind = MachineKind.OTHER
    capacity: int = 1

    def __post_init__(self) -> None:
        if self.capacity != 1:
            raise ValueError(f"machine {self.id}: capacity must be 1")


class Gate(str, Enum):
    """How a task's completion is detected at execution time."""

    TIMED_DELAY = "timed_delay"
    TRAJECTORY_DONE = "trajectory_done"
    BUSY_CLEAR = "busy_clear"


@dataclass(frozen=True)
class TaskSpec:
    """One step of an order, bound to a fixed machine.

    ``tend_machine`` is a second unit-capacity resource held for the whole
    duration (e.g. an arm holding a container under the food processor).
    """

    recipe_index: int
    task_index: int
    machine: str
    duration_s: int
    name: str = ""
    gate: Gate = Gate.TIMED_DELAY
    gate_delay_s: int = 0
    max_retries: int = 0
    tend_machine: Optional[str] = None
    tool_change: bool = False

    def __post_init__(self) -> None:
        if self.tend_machine == self.machine:
            raise ValueError(
                f"task ({self.recipe_index},{self.task_index}): "
                "tend machine equals primary machine"
            )

    @property
    def key(self) -> tuple[int, int]:
        return (self.recipe_index, self.task_index)

    def machines(self) -> tuple[str, ...]:
        if self.tend_machine is None:
            return (self.machine,)
        return (self.machine, self.tend_machine)


@dataclass(frozen=True)
class Order:
    """A linear chain of tasks with a relative completion deadline.

    ``deadline_s`` bounds elapsed time from the first task's start to the
    last task's end.
    """

    recipe_index: int
    name: str
    tasks: tuple[TaskSpec, ...]
    deadline_s: Optional[int] = None
    # Orders cut short by cancellations keep their remaining prefix but are
    # exempt from the deadline and completion-order constraints.
    truncated: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "tasks", tuple(self.tasks))


class TaskStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"
    CANCELED = "canceled"


@dataclass(frozen=True)
class Assignment:
    """Start/end placement of one task on its machine."""

    recipe_index: int
    task_index: int
    machine: str
    start_s: int
    end_s: int
    status: TaskStatus = TaskStatus.PENDING
    tries: int = 0

    @property
    def key(self) -> tuple[int, int]:
        return (self.recipe_index, self.task_index)

    @property
    def duration_s(self) -> int:
        return self.end_s - self.start_s

    def with_status(self, status: TaskStatus) -> "Assignment":
        return replace(self, status=status)


@dataclass(frozen=True)
class Schedule:
    """A complete placement of every scheduled task.

    ``ranks`` maps task key to its global position by start time (ties broken
    by task key), a permutation of the scheduled, non-canceled tasks.
    """

    assignments: tuple[Assignment, ...]
    makespan_s: int = 0
    ranks: dict[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "assignments", tuple(self.assignments))
        if not self.ranks:
            object.__setattr__(self, "ranks", compute_ranks(self.assignments))

    def assignment(self, key: tuple[int, int]) -> Assignment:
        for a in self.assignments:
            if a.key == key:
                return a
        raise KeyError(f"no assignment for task {key}")

    def to_json(self) -> dict:
        return {
            "makespan_s": self.makespan_s,
            "assignments": [
                {
                    "recipe_index": a.recipe_index,
                    "task_index": a.task_index,
                    "machine": a.machine,
                    "start_s": a.start_s,
                    "end_s": a.end_s,
                    "status": a.status.value,
                    "tries": a.tries,
                    "rank": self.ranks.get(a.key),
                }
                for a in sorted(self.assignments, key=lambda a: a.key)
            ],
        }


def compute_ranks(
    assignments: Iterable[Assignment],
) -> dict[tuple[int, int], int]:
    active = [a for a in assignments if a.status != TaskStatus.CANCELED]
    ordered = sorted(active, key=lambda a: (a.start_s, a.key))
    return {a.key: r for r, a in enumerate(ordered)}


def schedule_from_assignments(assignments: Iterable[Assignment]) -> Schedule:
    assignments = tuple(assignments)
    active = [a for a in assignments if a.status != TaskStatus.CANCELED]
    makespan = max((a.end_s for a in active), default=0)
    return Schedule(assignments=assignments, makespan_s=makespan)


class EventKind(str, Enum):
    ORDER_PLACED = "order_placed"
    TASK_STARTED = "task_started"
    TASK_COMPLETED = "task_completed"
    TASK_FAILED = "task_failed"
    TASK_CANCELED = "task_canceled"
    RESCHEDULE = "reschedule"
    APPLIANCE_STATUS = "appliance_status"
    OPERATOR_ALERT = "operator_alert"


@dataclass(frozen=True)
class KitchenEvent:
    """A timestamped occurrence on the engine's event stream."""

    at_s: float
    kind: EventKind
    payload: dict = field(default_factory=dict)
    seq: int = 0

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "at_s": round(self.at_s, 6),
            "kind": self.kind.value,
            "payload": self.payload,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


def validate_order(order: Order, machines: Iterable[Machine]) -> list[str]:
    """Return all structural violations of an order; empty list iff valid."""
    known = {m.id for m in machines}
    violations: list[str] = []
    if not order.tasks:
        violations.append(f"order {order.recipe_index}: no tasks")
    for expected_j, task in enumerate(order.tasks):
        loc = f"(i={order.recipe_index},j={task.task_index})"
        if task.recipe_index != order.recipe_index:
            violations.append(f"recipe index mismatch {loc}")
        if task.task_index != expected_j:
            violations.append(
                f"non-contiguous task index {loc}: expected j={expected_j}"
            )
        if task.duration_s <= 0:
            violations.append(
                f"nonpositive duration (i={order.recipe_index},j={task.task_index})"
            )
        for mid in task.machines():
            if mid not in known:
                violations.append(f"unknown machine {mid}")
        if task.max_retries < 0:
            violations.append(f"negative max_retries {loc}")
    if order.deadline_s is not None and order.deadline_s <= 0:
        violations.append(f"order {order.recipe_index}: nonpositive deadline")
    return violations


def _overlaps(a: Assignment, b: Assignment) -> bool:
    return a.start_s < b.end_s and b.start_s < a.end_s


def check_schedule(
    orders: Iterable[Order],
    machines: Iterable[Machine],
    incompatible_pairs: Iterable[frozenset[str]],
    schedule: Schedule,
) -> list[str]:
    """Check a schedule against all four constraint families.

    Reports every violated precedence, per-machine overlap, concurrence and
    horizon constraint.  Empty list iff the schedule is feasible.
    """
    orders = list(orders)
    tasks: dict[tuple[int, int], TaskSpec] = {
        t.key: t for o in orders for t in o.tasks
    }
    order_by_index = {o.recipe_index: o for o in orders}
    pairs = {frozenset(p) for p in incompatible_pairs}
    violations: list[str] = []

    active: list[Assignment] = []
    for a in schedule.assignments:
        if a.key not in tasks:
            raise KeyError(f"schedule references unknown task {a.key}")
        if a.status == TaskStatus.CANCELED:
            continue
        spec = tasks[a.key]
        if a.end_s != a.start_s + spec.duration_s:
            violations.append(
                f"duration mismatch {a.key}: {a.end_s - a.start_s} != {spec.duration_s}"
            )
        active.append(a)

    by_key = {a.key: a for a in active}

    # Precedence: x_{i,j} >= e_{i,j-1} within each order.
    for a in active:
        if a.task_index == 0:
            continue
        pred = by_key.get((a.recipe_index, a.task_index - 1))
        if pred is not None and a.start_s < pred.end_s:
            violations.append(
                f"precedence violation (i={a.recipe_index},j={a.task_index})"
            )

    # Per-machine overlap, tend machines included.
    busy: dict[str, list[Assignment]] = {}
    for a in active:
        for mid in tasks[a.key].machines():
            busy.setdefault(mid, []).append(a)
    for mid, assigned in sorted(busy.items()):
        assigned.sort(key=lambda a: (a.start_s, a.key))
        for first, second in zip(assigned, assigned[1:]):
            if _overlaps(first, second):
                violations.append(f"overlap on machine {mid}")

    # Concurrence: incompatible machine pairs never active simultaneously.
    for a in active:
        for b in active:
            if a.key >= b.key or not _overlaps(a, b):
                continue
            for ma in tasks[a.key].machines():
                for mb in tasks[b.key].machines():
                    if frozenset((ma, mb)) in pairs:
                        violations.append(
                            f"concurrence violation {a.key}/{b.key} ({ma},{mb})"
                        )

    # Horizon: per-order deadline and strictly increasing completion chain.
    order_end: dict[int, int] = {}
    for i, order in sorted(order_by_index.items()):
        if order.truncated:
            continue
        placed = [by_key[t.key] for t in order.tasks if t.key in by_key]
        if not placed or len(placed) != len(order.tasks):
            continue  # partially scheduled or canceled orders skip horizon
        first = min(a.start_s for a in placed)
        last = max(a.end_s for a in placed)
        order_end[i] = last
        if order.deadline_s is not None and last - first > order.deadline_s:
            violations.append(
                f"deadline violation order {i}: {last - first} > {order.deadline_s}"
            )
    done = sorted(order_end)
    for i, j in zip(done, done[1:]):
        if order_end[i] >= order_end[j]:
            violations.append(
                f"completion order violation: order {i} ends at {order_end[i]} "
                f">= order {j} at {order_end[j]}"
            )

    return violations
