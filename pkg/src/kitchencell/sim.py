"""Discrete-event simulation of the kitchen cell.

Models the three-level appliance protocol: a shared-memory image per
appliance (command + status sections and a one-writer Update flag), a
single-message serial bus with fixed per-message latency, Busy-flag task
execution, arm trajectory timers, the tool-changer grasp envelope and
fault injection.  All mutable state is owned by the simulator and advances
on one logical thread.
"""

from __future__ import annotations

import heapq
import itertools
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .model import Assignment, EventKind, Gate, KitchenEvent, TaskSpec

__all__ = [
    "Opcode",
    "ApplianceImage",
    "BusState",
    "GraspAttempt",
    "GraspConfig",
    "SimConfig",
    "KitchenSim",
    "attempt_grasp",
    "GRASP_MAX_TRANSLATION_MM",
    "GRASP_MAX_ANGLE_DEG",
]

# Tool-changer guiding-cone envelope: offsets inside it self-correct.
GRASP_MAX_TRANSLATION_MM = 8.0
GRASP_MAX_ANGLE_DEG = 10.0


class Opcode(str, Enum):
    READ = "read"
    COMMAND = "command"
    INITIALIZE = "initialize"


@dataclass
class ApplianceImage:
    """Shared-memory record for one appliance."""

    appliance_id: str
    mcu_id: int
    opcode: Optional[Opcode] = None
    params: dict = field(default_factory=dict)
    busy: bool = False
    temperature: float = 20.0
    error_code: int = 0
    update: int = 0
    initialized: bool = False


@dataclass
class BusState:
    """Single shared serial bus; at most one message in flight."""

    latency_s: float
    in_flight: Optional[tuple[int, str, float]] = None  # (mcu, appliance, done)
    queue: list = field(default_factory=list)


@dataclass(frozen=True)
class GraspAttempt:
    translational_offset_mm: float
    angular_offset_deg: float
    impedance_gain_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.translational_offset_mm < 0 or self.angular_offset_deg < 0:
            raise ValueError("grasp offsets must be nonnegative")
        if not (0 < self.impedance_gain_scale <= 1):
            raise ValueError("impedance gain scale must be in (0, 1]")


def attempt_grasp(attempt: GraspAttempt) -> bool:
    """Success iff both offsets lie inside the guiding-cone envelope."""
    return (
        attempt.translational_offset_mm <= GRASP_MAX_TRANSLATION_MM
        and attempt.angular_offset_deg <= GRASP_MAX_ANGLE_DEG
    )


@dataclass(frozen=True)
class GraspConfig:
    """Uniform offset distribution sampled per grasp attempt.

    Retries with a reduced impedance gain scale contract the distribution by
    that scale, modeling the increased compliance of a realignment attempt.
    """

    max_translation_mm: float = 0.0
    max_angle_deg: float = 0.0

    def sample(self, rng: random.Random, gain_scale: float = 1.0) -> GraspAttempt:
        return GraspAttempt(
            translational_offset_mm=rng.uniform(
                0.0, self.max_translation_mm * gain_scale
            ),
            angular_offset_deg=rng.uniform(0.0, self.max_angle_deg * gain_scale),
            impedance_gain_scale=gain_scale,
        )


@dataclass(frozen=True)
class SimConfig:
    bus_latency_s: float = 0.05
    poll_interval_s: float = 1.0 / 30.0
    read_timeout_s: float = 2.0
    seed: int = 0
    grasp: GraspConfig = field(default_factory=GraspConfig)


@dataclass
class _RunningTask:
    key: tuple[int, int]
    spec: TaskSpec
    assignment: Assignment
    token: int  # completion-event token; invalidated on fault


class KitchenSim:
    """Owns appliance images, the bus and arm timers; emits KitchenEvents."""

    def __init__(self, appliance_ids: list[str], config: SimConfig = SimConfig()):
        self.config = config
        self.clock_s = 0.0
        self.rng = random.Random(config.seed)
        self.images: dict[str, ApplianceImage] = {
            aid: ApplianceImage(appliance_id=aid, mcu_id=n)
            for n, aid in enumerate(sorted(appliance_ids))
        }
        self.bus = BusState(latency_s=config.bus_latency_s)
        self.running: dict[tuple[int, int], _RunningTask] = {}
        self.unresponsive: set[str] = set()
        self._heap: list[tuple[float, int, str, dict]] = []
        self._seq = itertools.count()
        self._token = itertools.count(1)
        self._dead_tokens: set[int] = set()
        self._pending: list[KitchenEvent] = []
        # Protocol audit trail: (time, record) tuples checked by tests.
        self.audit_writes: list[tuple[float, str, int, bool]] = []
        self.audit_bus: list[tuple[float, float, str]] = []
        self._last_busy: dict[str, bool] = {aid: False for aid in self.images}

    # -- scheduling ------------------------------------------------------

    def _at(self, t_s: float, kind: str, **payload) -> None:
        heapq.heappush(self._heap, (t_s, next(self._seq), kind, payload))

    def peek_time(self) -> Optional[float]:
        return self._heap[0][0] if self._heap else None

    def _emit(self, at_s: float, kind: EventKind, payload: dict) -> None:
        self._pending.append(KitchenEvent(at_s=at_s, kind=kind, payload=payload))

    # -- protocol --------------------------------------------------------

    def write_command(
        self, appliance_id: str, opcode: Opcode, params: Optional[dict] = None
    ) -> bool:
        """Scheduler-side shared-memory write; honors the Update handshake."""
        image = self.images[appliance_id]
        accepted = image.update == 0
        self.audit_writes.append(
            (self.clock_s, appliance_id, image.update, accepted)
        )
        if not accepted:
            return False
        image.opcode = opcode
        image.params = dict(params or {})
        image.update = 1
        self._enqueue_bus(appliance_id)
        return True

    def _enqueue_bus(self, appliance_id: str) -> None:
        self.bus.queue.append(appliance_id)
        self._try_start_bus()

    def _try_start_bus(self) -> None:
        if self.bus.in_flight is not None or not self.bus.queue:
            return
        appliance_id = self.bus.queue.pop(0)
        image = self.images[appliance_id]
        done = self.clock_s + self.bus.latency_s
        self.bus.in_flight = (image.mcu_id, appliance_id, done)
        self.audit_bus.append((self.clock_s, done, appliance_id))
        self._at(done, "bus_done", appliance=appliance_id)

    def _on_bus_done(self, at_s: float, appliance: str) -> None:
        self.bus.in_flight = None
        image = self.images[appliance]
        # Manager resets the Update flag once transmission completes.
        image.update = 0
        if appliance in self.unresponsive:
            self._at(
                at_s + self.config.read_timeout_s,
                "read_timeout",
                appliance=appliance,
            )
        elif image.opcode is Opcode.INITIALIZE:
            image.initialized = True
            image.busy = False
            image.error_code = 0
            image.temperature = 20.0
        elif image.opcode is Opcode.COMMAND:
            image.busy = True
            self._poll_status(at_s, appliance)
            duration = float(image.params.get("duration_s", 0))
            token = image.params.get("_token")
            self._at(
                at_s + duration,
                "busy_clear",
                appliance=appliance,
                token=token,
            )
        self._try_start_bus()

    # -- task execution --------------------------------------------------

    def start_task(
        self,
        spec: TaskSpec,
        assignment: Assignment,
        impedance_gain_scale: float = 1.0,
    ) -> None:
        """Begin executing a dispatched task at the current sim time."""
        token = next(self._token)
        task = _RunningTask(
            key=spec.key, spec=spec, assignment=assignment, token=token
        )
        self.running[spec.key] = task

        if spec.tool_change:
            attempt = self.config.grasp.sample(self.rng, impedance_gain_scale)
            if not attempt_grasp(attempt):
                self._at(
                    self.clock_s,
                    "task_fault",
                    key=spec.key,
                    fault_kind="grasp_misalignment",
                    detail=(
                        f"offset {attempt.translational_offset_mm:.1f} mm / "
                        f"{attempt.angular_offset_deg:.1f} deg"
                    ),
                )
                return

        if spec.gate is Gate.BUSY_CLEAR:
            ok = self.write_command(
                spec.machine,
                Opcode.COMMAND,
                {"duration_s": spec.duration_s, "_token": token},
            )
            if not ok:
                # Bus transmission still pending; retry once it completes.
                retry_at = (
                    self.bus.in_flight[2]
                    if self.bus.in_flight is not None
                    else self.clock_s + self.bus.latency_s
                )
                self._at(retry_at, "write_retry", key=spec.key,
                         gain=impedance_gain_scale)
        else:
            # Arm trajectory or plain timer: completes after the duration.
            self._at(
                self.clock_s + spec.duration_s + spec.gate_delay_s,
                "task_done",
                key=spec.key,
                token=token,
            )

    def inject_fault(
        self, key: tuple[int, int], at_s: float, kind: str, detail: str = ""
    ) -> None:
        if at_s < self.clock_s:
            raise ValueError(f"fault time {at_s} precedes sim clock {self.clock_s}")
        if key not in self.running:
            raise KeyError(f"fault targets task {key} which is not running")
        self._at(at_s, "task_fault", key=key, fault_kind=kind, detail=detail)

    # -- event processing ------------------------------------------------

    def advance(self, until_s: float) -> list[KitchenEvent]:
        """Process everything scheduled up to ``until_s`` inclusive."""
        if until_s < self.clock_s - 1e-12:
            raise ValueError(f"cannot advance backwards to {until_s}")
        while self._heap and self._heap[0][0] <= until_s + 1e-12:
            at_s, _, kind, payload = heapq.heappop(self._heap)
            self.clock_s = max(self.clock_s, at_s)
            getattr(self, f"_handle_{kind}")(at_s, **payload)
        self.clock_s = max(self.clock_s, until_s)
        out, self._pending = self._pending, []
        return out

    def _handle_bus_done(self, at_s: float, appliance: str) -> None:
        self._on_bus_done(at_s, appliance)

    def _handle_write_retry(self, at_s: float, key, gain: float) -> None:
        task = self.running.get(tuple(key))
        if task is None or task.token in self._dead_tokens:
            return
        spec = task.spec
        ok = self.write_command(
            spec.machine,
            Opcode.COMMAND,
            {"duration_s": spec.duration_s, "_token": task.token},
        )
        if not ok:
            retry_at = (
                self.bus.in_flight[2]
                if self.bus.in_flight is not None
                else at_s + self.bus.latency_s
            )
            self._at(retry_at, "write_retry", key=key, gain=gain)

    def _complete(self, at_s: float, key: tuple[int, int], token: int) -> None:
        if token in self._dead_tokens:
            self._dead_tokens.discard(token)
            return
        task = self.running.pop(key, None)
        if task is None or task.token != token:
            return
        self._emit(
            at_s,
            EventKind.TASK_COMPLETED,
            {
                "recipe_index": key[0],
                "task_index": key[1],
                "machine": task.spec.machine,
            },
        )

    def _handle_busy_clear(self, at_s: float, appliance: str, token) -> None:
        image = self.images[appliance]
        task = next(
            (t for t in self.running.values() if t.token == token), None
        )
        if token in self._dead_tokens or task is None:
            self._dead_tokens.discard(token)
            return
        image.busy = False
        self._poll_status(at_s, appliance)
        self._complete(at_s, task.key, token)

    def _handle_task_done(self, at_s: float, key, token: int) -> None:
        self._complete(at_s, tuple(key), token)

    def _handle_task_fault(
        self, at_s: float, key, fault_kind: str, detail: str
    ) -> None:
        key = tuple(key)
        task = self.running.pop(key, None)
        if task is None:
            return
        self._dead_tokens.add(task.token)
        image = self.images.get(task.spec.machine)
        if image is not None and image.busy:
            image.busy = False
            if fault_kind == "machine_failure":
                image.error_code = 1
            self._poll_status(at_s, task.spec.machine)
        self._emit(
            at_s,
            EventKind.TASK_FAILED,
            {
                "recipe_index": key[0],
                "task_index": key[1],
                "machine": task.spec.machine,
                "kind": fault_kind,
                "detail": detail,
            },
        )

    def _handle_read_timeout(self, at_s: float, appliance: str) -> None:
        image = self.images[appliance]
        image.error_code = 2  # no answer within the configured deadline
        self._emit(
            at_s,
            EventKind.APPLIANCE_STATUS,
            {"appliance": appliance, "error": "read_timeout"},
        )

    def _poll_status(self, at_s: float, appliance: str) -> None:
        """Report a Busy change at the next status-poll tick."""
        image = self.images[appliance]
        if self._last_busy[appliance] == image.busy:
            return
        self._last_busy[appliance] = image.busy
        poll = self.config.poll_interval_s
        tick = max(math.ceil((at_s - 1e-12) / poll) * poll, at_s)
        self._at(
            tick,
            "emit_status",
            appliance=appliance,
            busy=image.busy,
            temperature=image.temperature,
            error_code=image.error_code,
        )

    def _handle_emit_status(
        self,
        at_s: float,
        appliance: str,
        busy: bool,
        temperature: float,
        error_code: int,
    ) -> None:
        self._emit(
            at_s,
            EventKind.APPLIANCE_STATUS,
            {
                "appliance": appliance,
                "busy": busy,
                "temperature": temperature,
                "error_code": error_code,
            },
        )

    # -- audit helpers ---------------------------------------------------

    def handshake_violations(self) -> int:
        """Writes accepted while Update was already 1 (must stay zero)."""
        return sum(1 for _, _, update, ok in self.audit_writes if ok and update)

    def bus_violations(self) -> int:
        """Overlapping bus transmissions (must stay zero)."""
        spans = sorted(self.audit_bus)
        count = 0
        for (s0, e0, _), (s1, e1, _) in zip(spans, spans[1:]):
            if s1 < e0 - 1e-12:
                count += 1
        return count
