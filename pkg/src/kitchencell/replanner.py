"""Event-loop planner: to-do/running/finished bookkeeping, fault retries,
cancellations and re-solving with running work pinned.

A reschedule action is emitted only for the two replan triggers: a new order
arrival or a fault that can no longer be retried.  Retriable faults re-solve
silently so the retried task gets a fresh slot without surfacing a replan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Union

from .model import (
    Assignment,
    EventKind,
    KitchenEvent,
    Machine,
    Order,
    Schedule,
    TaskSpec,
    TaskStatus,
    schedule_from_assignments,
    validate_order,
)
from .scheduler import (
    JsspInstance,
    SolveResult,
    SolveStatus,
    SolverConfig,
    solve,
)
from . import schemas

__all__ = [
    "FaultKind",
    "Fault",
    "StartTask",
    "RescheduleAction",
    "CancelTask",
    "Alert",
    "Action",
    "PlannerState",
    "step",
    "handle_fault",
    "reschedule",
]

# Impedance gain multiplier applied per grasp retry (compliance increase).
GRASP_RETRY_GAIN_DECAY = 0.5


class FaultKind(str, Enum):
    GRASP_MISALIGNMENT = "grasp_misalignment"
    MACHINE_FAILURE = "machine_failure"


@dataclass(frozen=True)
class Fault:
    recipe_index: int
    task_index: int
    machine: str
    at_s: float
    kind: FaultKind
    detail: str = ""

    @property
    def key(self) -> tuple[int, int]:
        return (self.recipe_index, self.task_index)


@dataclass(frozen=True)
class StartTask:
    task: TaskSpec
    assignment: Assignment
    impedance_gain_scale: float = 1.0


@dataclass(frozen=True)
class RescheduleAction:
    schedule: Schedule
    reason: str


@dataclass(frozen=True)
class CancelTask:
    key: tuple[int, int]


@dataclass(frozen=True)
class Alert:
    message: str


Action = Union[StartTask, RescheduleAction, CancelTask, Alert]


@dataclass
class PlannerState:
    machines: tuple[Machine, ...]
    incompatible_pairs: frozenset[frozenset[str]] = frozenset()
    solver_config: SolverConfig = field(default_factory=SolverConfig)
    orders: dict[int, Order] = field(default_factory=dict)
    todo: dict[tuple[int, int], TaskSpec] = field(default_factory=dict)
    running: dict[tuple[int, int], Assignment] = field(default_factory=dict)
    finished: dict[tuple[int, int], Assignment] = field(default_factory=dict)
    canceled: dict[tuple[int, int], Assignment] = field(default_factory=dict)
    tries: dict[tuple[int, int], int] = field(default_factory=dict)
    # impedance gain scale to use on the next attempt of a retried grasp task
    retry_gain: dict[tuple[int, int], float] = field(default_factory=dict)
    unavailable_machines: set[str] = field(default_factory=set)
    schedule: Schedule = field(default_factory=lambda: Schedule(assignments=()))
    clock_s: float = 0.0

    # -- derived -----------------------------------------------------------

    def task_spec(self, key: tuple[int, int]) -> TaskSpec:
        order = self.orders[key[0]]
        for t in order.tasks:
            if t.key == key:
                return t
        raise KeyError(f"unknown task {key}")

    def machine_queues(self) -> dict[str, list[tuple[int, int]]]:
        """Per-machine ordered to-do queues derived from the schedule."""
        queues: dict[str, list[tuple[int, int]]] = {m.id: [] for m in self.machines}
        pending = sorted(
            (a for a in self.schedule.assignments
             if a.key in self.todo),
            key=lambda a: (a.start_s, a.key),
        )
        for a in pending:
            for mid in self.task_spec(a.key).machines():
                queues[mid].append(a.key)
        return queues

    def busy_machines(self) -> set[str]:
        out: set[str] = set()
        for key in self.running:
            out.update(self.task_spec(key).machines())
        return out

    def next_dispatch_time(self) -> Optional[int]:
        """Next integer second at which some pending task could start."""
        now = int(math.ceil(self.clock_s - 1e-9))
        busy = self.busy_machines()
        times = [
            max(a.start_s, now)
            for a in self.schedule.assignments
            if a.key in self.todo
            and self._ready(a.key)
            and not any(
                m in busy or m in self.unavailable_machines
                for m in self.task_spec(a.key).machines()
            )
        ]
        return min(times, default=None)

    def _ready(self, key: tuple[int, int]) -> bool:
        i, j = key
        return j == 0 or (i, j - 1) in self.finished

    def all_done(self) -> bool:
        return not self.todo and not self.running

    def gantt_assignments(self) -> tuple[Assignment, ...]:
        """Live schedule plus canceled bars for display."""
        keys = {a.key for a in self.schedule.assignments}
        extra = tuple(a for k, a in sorted(self.canceled.items()) if k not in keys)
        return tuple(self.schedule.assignments) + extra


# ---------------------------------------------------------------------------


def _active_orders(state: PlannerState) -> tuple[Order, ...]:
    """Orders restricted to their non-canceled task prefix."""
    out = []
    for i in sorted(state.orders):
        order = state.orders[i]
        keep = tuple(t for t in order.tasks if t.key not in state.canceled)
        if not keep:
            continue
        truncated = len(keep) < len(order.tasks)
        out.append(replace(order, tasks=keep, truncated=truncated or order.truncated))
    return tuple(out)


def _solve_current(state: PlannerState) -> SolveResult:
    pinned = tuple(
        sorted(
            list(state.running.values()) + list(state.finished.values()),
            key=lambda a: a.key,
        )
    )
    instance = JsspInstance(
        orders=_active_orders(state),
        machines=state.machines,
        incompatible_pairs=state.incompatible_pairs,
        pinned=pinned,
        release_s=int(math.ceil(state.clock_s - 1e-9)),
    )
    return solve(instance, state.solver_config)


def reschedule(state: PlannerState) -> Schedule:
    """Re-solve with running/finished tasks pinned; canceled tasks excluded.

    Raises RuntimeError when the solver proves the remaining work infeasible.
    """
    result = _solve_current(state)
    if result.schedule is None:
        raise RuntimeError(f"reschedule infeasible ({result.status.value})")
    return result.schedule


def handle_fault(state: PlannerState, fault: Fault) -> list[Action]:
    """Apply retry-or-cancel policy for a fault on a running task."""
    key = fault.key
    if key not in state.running:
        raise KeyError(f"fault targets task {key} which is not running")
    assignment = state.running.pop(key)
    spec = state.task_spec(key)
    attempts = state.tries.get(key, 0) + 1
    state.tries[key] = attempts
    actions: list[Action] = []

    if attempts <= spec.max_retries:
        state.todo[key] = spec
        if fault.kind is FaultKind.GRASP_MISALIGNMENT:
            state.retry_gain[key] = GRASP_RETRY_GAIN_DECAY ** attempts
        return actions

    # Unretriable: cancel this task and every remaining task of any order
    # that still needs the failed machine.
    if fault.kind is FaultKind.MACHINE_FAILURE:
        state.unavailable_machines.add(fault.machine)
    state.canceled[key] = replace(
        assignment, status=TaskStatus.CANCELED, tries=attempts
    )
    actions.append(CancelTask(key))
    affected = {
        k[0]
        for k, t in state.todo.items()
        if fault.machine in t.machines()
    }
    affected.add(key[0])
    for k in sorted(k for k in state.todo if k[0] in affected):
        t = state.todo.pop(k)
        prior = _assignment_for(state, k)
        state.canceled[k] = replace(prior, status=TaskStatus.CANCELED)
        actions.append(CancelTask(k))
    return actions


def _assignment_for(state: PlannerState, key: tuple[int, int]) -> Assignment:
    spec = state.task_spec(key)
    try:
        return state.schedule.assignment(key)
    except KeyError:
        start = int(math.ceil(state.clock_s))
        return Assignment(
            recipe_index=key[0],
            task_index=key[1],
            machine=spec.machine,
            start_s=start,
            end_s=start + spec.duration_s,
        )


def _merge_canceled(state: PlannerState, schedule: Schedule) -> Schedule:
    merged = tuple(schedule.assignments) + tuple(
        a for k, a in sorted(state.canceled.items())
    )
    return schedule_from_assignments(merged)


def _ingest_order(state: PlannerState, order: Order) -> list[Action]:
    actions: list[Action] = []
    problems = validate_order(order, state.machines)
    if order.recipe_index in state.orders:
        problems.append(f"duplicate recipe index {order.recipe_index}")
    for t in order.tasks:
        for mid in t.machines():
            if mid in state.unavailable_machines:
                problems.append(f"machine {mid} unavailable")
    if problems:
        actions.append(Alert(f"order rejected: {'; '.join(sorted(set(problems)))}"))
        return actions
    state.orders[order.recipe_index] = order
    for t in order.tasks:
        state.todo[t.key] = t
    return actions


def _dispatch(state: PlannerState) -> list[Action]:
    """Promote ready pending tasks whose slot has arrived and machines idle.

    Dispatch happens only on whole-second boundaries so every assignment
    keeps integer times; fractional wake-ups (bus latency) defer to the next
    second.
    """
    if abs(state.clock_s - round(state.clock_s)) > 1e-9:
        return []
    actions: list[Action] = []
    progressed = True
    while progressed:
        progressed = False
        busy = state.busy_machines()
        candidates = sorted(
            (a for a in state.schedule.assignments if a.key in state.todo),
            key=lambda a: (a.start_s, a.key),
        )
        for a in candidates:
            if a.start_s > state.clock_s + 1e-9:
                continue
            if not state._ready(a.key):
                continue
            spec = state.task_spec(a.key)
            if any(m in busy or m in state.unavailable_machines
                   for m in spec.machines()):
                continue
            start = int(math.ceil(state.clock_s - 1e-9))
            actual = replace(
                a,
                start_s=max(a.start_s, start),
                end_s=max(a.start_s, start) + spec.duration_s,
                status=TaskStatus.RUNNING,
                tries=state.tries.get(a.key, 0),
            )
            del state.todo[a.key]
            state.running[a.key] = actual
            state.schedule = schedule_from_assignments(
                tuple(x for x in state.schedule.assignments if x.key != a.key)
                + (actual,)
            )
            actions.append(
                StartTask(
                    task=spec,
                    assignment=actual,
                    impedance_gain_scale=state.retry_gain.get(a.key, 1.0),
                )
            )
            busy.update(spec.machines())
            progressed = True
    return actions


def step(
    state: PlannerState, events: list[KitchenEvent]
) -> tuple[PlannerState, list[Action]]:
    """Consume timestamped events, replan when triggered, dispatch ready work."""
    for ev in events:
        if ev.at_s < state.clock_s - 1e-9:
            raise ValueError(
                f"event at {ev.at_s} precedes planner clock {state.clock_s}"
            )

    actions: list[Action] = []
    replan_reason: Optional[str] = None
    silent_replan = False
    rollback_orders: list[int] = []

    for ev in sorted(events, key=lambda e: (e.at_s, e.seq)):
        state.clock_s = max(state.clock_s, ev.at_s)
        if ev.kind is EventKind.ORDER_PLACED:
            order = schemas.order_from_json(ev.payload["order"])
            pre = list(_ingest_order(state, order))
            actions.extend(pre)
            if not any(isinstance(a, Alert) for a in pre):
                replan_reason = "order_placed"
                rollback_orders.append(order.recipe_index)
        elif ev.kind is EventKind.TASK_COMPLETED:
            key = (ev.payload["recipe_index"], ev.payload["task_index"])
            if key not in state.running:
                raise KeyError(f"completion for task {key} which is not running")
            a = state.running.pop(key)
            state.finished[key] = replace(a, status=TaskStatus.DONE)
            state.schedule = schedule_from_assignments(
                tuple(x for x in state.schedule.assignments if x.key != key)
                + (state.finished[key],)
            )
        elif ev.kind is EventKind.TASK_FAILED:
            fault = Fault(
                recipe_index=ev.payload["recipe_index"],
                task_index=ev.payload["task_index"],
                machine=ev.payload["machine"],
                at_s=ev.at_s,
                kind=FaultKind(ev.payload["kind"]),
                detail=ev.payload.get("detail", ""),
            )
            fault_actions = handle_fault(state, fault)
            actions.extend(fault_actions)
            if any(isinstance(a, CancelTask) for a in fault_actions):
                replan_reason = "task_failed"
            else:
                silent_replan = True
        elif ev.kind is EventKind.APPLIANCE_STATUS:
            pass  # informational only

    if replan_reason or silent_replan:
        try:
            state.schedule = _merge_canceled(state, reschedule(state))
        except RuntimeError as exc:
            if rollback_orders:
                # Newly ingested orders made the plan infeasible: reject them.
                for i in rollback_orders:
                    order = state.orders.pop(i)
                    for t in order.tasks:
                        state.todo.pop(t.key, None)
                actions.append(Alert(f"order rejected as infeasible: {exc}"))
                replan_reason = None if not silent_replan else replan_reason
                try:
                    state.schedule = _merge_canceled(state, reschedule(state))
                except RuntimeError:
                    pass  # keep the previous schedule
            else:
                actions.append(Alert(str(exc)))
                replan_reason = None
        if replan_reason:
            actions.append(
                RescheduleAction(schedule=state.schedule, reason=replan_reason)
            )

    actions.extend(_dispatch(state))
    return state, actions
