"""Couples the planner event loop with the kitchen simulator.

The engine owns the single timestamped input queue (orders, fault
injections), drives the simulator and planner chronologically, and appends
every emitted event to an ordered, replay-deterministic log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .model import EventKind, KitchenEvent, Machine
from .replanner import (
    Alert,
    CancelTask,
    PlannerState,
    RescheduleAction,
    StartTask,
    step,
)
from .scheduler import SolverConfig
from .sim import KitchenSim, SimConfig
from . import schemas

__all__ = ["Engine", "ScenarioFault", "engine_from_scenario", "run_scenario"]


@dataclass
class ScenarioFault:
    key: tuple[int, int]
    at_s: float
    kind: str
    detail: str = ""
    consumed: bool = False


@dataclass
class _OrderInput:
    at_s: int
    seq: int
    payload: dict


class Engine:
    def __init__(
        self,
        machines: tuple[Machine, ...],
        incompatible_pairs: frozenset[frozenset[str]] = frozenset(),
        solver_config: SolverConfig = SolverConfig(),
        sim_config: SimConfig = SimConfig(),
    ):
        self.planner = PlannerState(
            machines=tuple(machines),
            incompatible_pairs=frozenset(incompatible_pairs),
            solver_config=solver_config,
        )
        self.sim = KitchenSim([m.id for m in machines], sim_config)
        self.log: list[KitchenEvent] = []
        self._seq = 0
        self._orders: list[_OrderInput] = []
        self._order_seq = 0
        self.faults: list[ScenarioFault] = []
        self.subscribers: list[Callable[[KitchenEvent], None]] = []

    # -- external inputs -------------------------------------------------

    def submit_order(self, at_s: float, order_doc: dict) -> None:
        """Queue an order for ingestion at ``at_s`` (rounded up to a second)."""
        at = max(int(math.ceil(at_s - 1e-9)), 0)
        self._orders.append(_OrderInput(at, self._order_seq, order_doc))
        self._order_seq += 1
        self._orders.sort(key=lambda o: (o.at_s, o.seq))

    def submit_fault(
        self, key: tuple[int, int], at_s: float, kind: str, detail: str = ""
    ) -> None:
        self.faults.append(ScenarioFault(key=key, at_s=at_s, kind=kind, detail=detail))

    # -- log -------------------------------------------------------------

    def _log(self, event: KitchenEvent) -> KitchenEvent:
        stamped = KitchenEvent(
            at_s=event.at_s, kind=event.kind, payload=event.payload, seq=self._seq
        )
        self._seq += 1
        self.log.append(stamped)
        for cb in self.subscribers:
            cb(stamped)
        return stamped

    def log_lines(self) -> list[str]:
        return [e.to_line() for e in self.log]

    def write_log(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.log_lines()) + "\n")

    # -- main loop -------------------------------------------------------

    @property
    def clock_s(self) -> float:
        return self.sim.clock_s

    def _next_time(self) -> Optional[float]:
        candidates = []
        t = self.sim.peek_time()
        if t is not None:
            candidates.append(t)
        if self._orders:
            candidates.append(float(self._orders[0].at_s))
        d = self.planner.next_dispatch_time()
        if d is not None:
            candidates.append(float(d))
        return min(candidates, default=None)

    def _arm_pending_faults(self) -> None:
        for fault in self.faults:
            if fault.consumed or fault.key not in self.sim.running:
                continue
            inject_at = max(fault.at_s, self.sim.clock_s)
            self.sim.inject_fault(fault.key, inject_at, fault.kind, fault.detail)
            fault.consumed = True

    def _process_at(self, t: float) -> None:
        sim_events = self.sim.advance(t)
        planner_events: list[KitchenEvent] = []
        for ev in sim_events:
            planner_events.append(self._log(ev))

        while self._orders and self._orders[0].at_s <= t + 1e-9:
            inp = self._orders.pop(0)
            ev = self._log(
                KitchenEvent(
                    at_s=float(inp.at_s),
                    kind=EventKind.ORDER_PLACED,
                    payload={"order": inp.payload},
                )
            )
            planner_events.append(ev)

        self.planner.clock_s = max(self.planner.clock_s, t)
        _, actions = step(self.planner, planner_events)

        for action in actions:
            now = self.planner.clock_s
            if isinstance(action, StartTask):
                self._log(
                    KitchenEvent(
                        at_s=float(action.assignment.start_s),
                        kind=EventKind.TASK_STARTED,
                        payload={
                            "recipe_index": action.task.recipe_index,
                            "task_index": action.task.task_index,
                            "machine": action.task.machine,
                            "start_s": action.assignment.start_s,
                            "end_s": action.assignment.end_s,
                            "tries": action.assignment.tries,
                        },
                    )
                )
                self.sim.start_task(
                    action.task, action.assignment, action.impedance_gain_scale
                )
            elif isinstance(action, RescheduleAction):
                self._log(
                    KitchenEvent(
                        at_s=now,
                        kind=EventKind.RESCHEDULE,
                        payload={
                            "reason": action.reason,
                            "makespan_s": action.schedule.makespan_s,
                        },
                    )
                )
            elif isinstance(action, CancelTask):
                self._log(
                    KitchenEvent(
                        at_s=now,
                        kind=EventKind.TASK_CANCELED,
                        payload={
                            "recipe_index": action.key[0],
                            "task_index": action.key[1],
                        },
                    )
                )
            elif isinstance(action, Alert):
                self._log(
                    KitchenEvent(
                        at_s=now,
                        kind=EventKind.OPERATOR_ALERT,
                        payload={"message": action.message},
                    )
                )

        self._arm_pending_faults()

    def run_until(self, until_s: float) -> None:
        while True:
            t = self._next_time()
            if t is None or t > until_s + 1e-9:
                break
            self._process_at(t)
        if self.sim.clock_s < until_s:
            self._process_at(until_s)

    def run_to_completion(self, horizon_s: float = 86_400.0) -> None:
        """Run until all tasks have settled or the horizon is reached."""
        while True:
            t = self._next_time()
            if t is None or t > horizon_s:
                break
            self._process_at(t)
        if not self.planner.all_done() and self.sim.clock_s < horizon_s:
            self._process_at(min(self.sim.clock_s + 1.0, horizon_s))


# ---------------------------------------------------------------------------
# Scenario files


def engine_from_scenario(doc: dict) -> Engine:
    schemas.validate_document(doc, schemas.SCENARIO_SCHEMA)
    machines, pairs = schemas.machines_from_json(doc)
    sim_doc = doc.get("sim", {})
    sim_config = SimConfig(
        bus_latency_s=sim_doc.get("bus_latency_s", 0.05),
        poll_interval_s=sim_doc.get("poll_interval_s", 1.0 / 30.0),
        read_timeout_s=sim_doc.get("read_timeout_s", 2.0),
        seed=sim_doc.get("seed", 0),
    )
    solver_doc = doc.get("solver", {})
    solver_config = SolverConfig(
        time_budget_ms=solver_doc.get("time_budget_ms", 30_000),
        node_budget=solver_doc.get("node_budget", 2_000_000),
        random_seed=solver_doc.get("random_seed", 0),
    )
    engine = Engine(
        machines=machines,
        incompatible_pairs=pairs,
        solver_config=solver_config,
        sim_config=sim_config,
    )
    for entry in doc.get("orders", []):
        engine.submit_order(entry["at_s"], entry["order"])
    for entry in doc.get("faults", []):
        engine.submit_fault(
            key=(entry["recipe_index"], entry["task_index"]),
            at_s=entry["at_s"],
            kind=entry["kind"],
            detail=entry.get("detail", ""),
        )
    return engine


def run_scenario(doc: dict, horizon_s: float = 86_400.0) -> Engine:
    engine = engine_from_scenario(doc)
    engine.run_to_completion(horizon_s)
    return engine
