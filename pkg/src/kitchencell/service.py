"""HTTP service around a live engine session.

Handlers never mutate engine state directly: every request takes the
session lock, enqueues its input through the engine's normal intake path,
and reads immutable snapshots.  A background thread advances simulated
time at a configurable rate; the event stream replays the append-only log
from any cursor and then tails new events, each tagged with its sequence
number.
"""

from __future__ import annotations

import json
import math
import queue
import threading
import time
from typing import Iterator, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from . import schemas
from .engine import Engine
from .gantt import build_gantt
from .model import EventKind, KitchenEvent
from .replanner import FaultKind
from .scheduler import SolverConfig
from .sim import SimConfig

__all__ = ["EngineSession", "create_app"]


class EngineSession:
    """Thread-safe wrapper that owns the engine and its wall-clock driver."""

    def __init__(
        self,
        machines_doc: dict,
        rate: float = 1.0,
        solver_config: SolverConfig = SolverConfig(),
        sim_config: SimConfig = SimConfig(),
    ):
        machines, pairs = schemas.machines_from_json(machines_doc)
        self.engine = Engine(
            machines=machines,
            incompatible_pairs=pairs,
            solver_config=solver_config,
            sim_config=sim_config,
        )
        self.machines_doc = machines_doc
        self.lock = threading.RLock()
        self.rate = rate
        self.running = False
        self._thread: Optional[threading.Thread] = None
        self._subscribers: list[queue.Queue] = []
        self.engine.subscribers.append(self._broadcast)

    # -- event fan-out ---------------------------------------------------

    def _broadcast(self, event: KitchenEvent) -> None:
        for q in list(self._subscribers):
            q.put(event)

    def subscribe(self) -> "queue.Queue[KitchenEvent]":
        q: queue.Queue = queue.Queue()
        self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        if q in self._subscribers:
            self._subscribers.remove(q)

    # -- time driver -----------------------------------------------------

    def start(self) -> None:
        with self.lock:
            if self.running:
                return
            self.running = True
            self._thread = threading.Thread(target=self._drive, daemon=True)
            self._thread.start()

    def pause(self) -> None:
        with self.lock:
            self.running = False

    def set_rate(self, rate: float) -> None:
        if rate <= 0:
            raise ValueError("rate must be positive")
        with self.lock:
            self.rate = rate

    def _drive(self) -> None:
        tick = 0.05
        while True:
            time.sleep(tick)
            with self.lock:
                if not self.running:
                    return
                target = self.engine.clock_s + self.rate * tick
                self.engine.run_until(target)

    # -- intake ----------------------------------------------------------

    def place_order(self, order_doc: dict) -> tuple[int, float]:
        """Ingest an order at the next whole second.

        Returns (recipe index, ingestion time).  Raises ValueError with the
        solver diagnosis when the order makes the schedule infeasible.
        """
        schemas.validate_document(order_doc, schemas.ORDER_SCHEMA)
        with self.lock:
            at = max(int(math.ceil(self.engine.clock_s - 1e-9)), 0)
            mark = len(self.engine.log)
            self.engine.submit_order(at, order_doc)
            self.engine._process_at(at)
            for event in self.engine.log[mark:]:
                if event.kind is EventKind.OPERATOR_ALERT:
                    raise ValueError(event.payload.get("message", "order rejected"))
            return int(order_doc["recipe_index"]), float(at)

    def inject_fault(
        self, recipe_index: int, task_index: int, kind: str, detail: str = ""
    ) -> None:
        """Raises LookupError if the target task is not currently running."""
        with self.lock:
            if not self.running:
                raise RuntimeError("simulation is not running")
            kind = FaultKind(kind).value
            key = (recipe_index, task_index)
            if key not in self.engine.sim.running:
                raise LookupError(f"task {key} is not running")
            self.engine.submit_fault(key, self.engine.clock_s, kind, detail)
            self.engine._arm_pending_faults()

    # -- snapshots -------------------------------------------------------

    def schedule_snapshot(self) -> dict:
        with self.lock:
            planner = self.engine.planner
            assignments = planner.gantt_assignments()
            names = {
                t.key: t.name for o in planner.orders.values() for t in o.tasks
            }
            rows = build_gantt(
                assignments, [m.id for m in planner.machines], names
            )
            return {
                "schema": schemas.SCHEMA_TAG,
                "clock_s": self.engine.clock_s,
                "cursor": len(self.engine.log) - 1,
                "makespan_s": planner.schedule.makespan_s,
                "assignments": [
                    {
                        "recipe_index": a.key[0],
                        "task_index": a.key[1],
                        "name": names.get(a.key, ""),
                        "machine": a.machine,
                        "start_s": a.start_s,
                        "end_s": a.end_s,
                        "status": a.status.value,
                        "tries": a.tries,
                    }
                    for a in assignments
                ],
                "gantt": [
                    {
                        "machine": row.machine,
                        "bars": [
                            {
                                "label": b.label,
                                "start_s": b.start_s,
                                "end_s": b.end_s,
                                "status": b.status,
                                "recipe_index": b.recipe_index,
                                "task_index": b.task_index,
                            }
                            for b in row.bars
                        ],
                    }
                    for row in rows
                ],
            }

    def machines_snapshot(self) -> dict:
        with self.lock:
            planner = self.engine.planner
            busy = planner.busy_machines()
            return {
                "schema": schemas.SCHEMA_TAG,
                "machines": [
                    {
                        "id": m.id,
                        "kind": m.kind.value,
                        "busy": m.id in busy,
                        "available": m.id not in planner.unavailable_machines,
                    }
                    for m in planner.machines
                ],
            }


def _sse(event: KitchenEvent) -> str:
    return f"id: {event.seq}\ndata: {event.to_line()}\n\n"


def create_app(
    machines_doc: dict,
    rate: float = 1.0,
    solver_config: SolverConfig = SolverConfig(),
    sim_config: SimConfig = SimConfig(),
) -> FastAPI:
    session = EngineSession(
        machines_doc, rate=rate, solver_config=solver_config, sim_config=sim_config
    )
    app = FastAPI(title="kitchen cell")
    app.state.session = session

    @app.post("/orders", status_code=201)
    async def post_order(request: Request):
        doc = await request.json()
        try:
            recipe_index, at_s = session.place_order(doc)
        except schemas.SchemaError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        except ValueError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        return {"id": recipe_index, "at_s": at_s}

    @app.post("/faults", status_code=202)
    async def post_fault(request: Request):
        doc = await request.json()
        try:
            session.inject_fault(
                int(doc["recipe_index"]),
                int(doc["task_index"]),
                str(doc.get("kind", "machine_failure")),
                str(doc.get("detail", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            return JSONResponse({"error": f"bad fault request: {exc}"}, 400)
        except (RuntimeError, LookupError) as exc:
            return JSONResponse({"error": str(exc)}, status_code=409)
        return {"status": "accepted"}

    @app.get("/schedule")
    async def get_schedule():
        return session.schedule_snapshot()

    @app.get("/machines")
    async def get_machines():
        return session.machines_snapshot()

    @app.post("/sim/start")
    async def sim_start():
        session.start()
        return {"running": True, "rate": session.rate}

    @app.post("/sim/pause")
    async def sim_pause():
        session.pause()
        return {"running": False, "rate": session.rate}

    @app.post("/sim/rate")
    async def sim_rate(request: Request):
        doc = await request.json()
        try:
            session.set_rate(float(doc["rate"]))
        except (KeyError, TypeError, ValueError) as exc:
            return JSONResponse({"error": f"bad rate: {exc}"}, status_code=400)
        return {"running": session.running, "rate": session.rate}

    @app.get("/events")
    async def get_events(since: int = -1, follow: bool = True, timeout_s: float = 30.0):
        def stream() -> Iterator[str]:
            with session.lock:
                backlog = [e for e in session.engine.log if e.seq > since]
                q = session.subscribe() if follow else None
            last = since
            try:
                for event in backlog:
                    yield _sse(event)
                    last = event.seq
                if q is None:
                    return
                deadline = time.monotonic() + timeout_s
                while time.monotonic() < deadline:
                    try:
                        event = q.get(timeout=0.25)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    if event.seq <= last:
                        continue
                    yield _sse(event)
                    last = event.seq
            finally:
                if q is not None:
                    session.unsubscribe(q)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
