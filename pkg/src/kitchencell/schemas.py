"""Versioned JSON file formats (``kitchen-cell/v1``) and codecs.

Every file carries ``"schema": "kitchen-cell/v1"``.  Times are integer
seconds, machine ids are strings.  Validation errors name the offending
JSON path.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import jsonschema

from .model import Gate, Machine, MachineKind, Order, TaskSpec

SCHEMA_TAG = "kitchen-cell/v1"

__all__ = [
    "SCHEMA_TAG",
    "SchemaError",
    "MACHINES_SCHEMA",
    "ORDERS_SCHEMA",
    "SCENARIO_SCHEMA",
    "ORDER_SCHEMA",
    "TRAJECTORY_SCHEMA",
    "LAYOUT_SCHEMA",
    "validate_document",
    "load_document",
    "machine_from_json",
    "machines_from_json",
    "task_from_json",
    "order_from_json",
    "orders_from_json",
    "order_to_json",
]


class SchemaError(ValueError):
    """A document failed schema validation; message names the JSON path."""


_MACHINE = {
    "type": "object",
    "required": ["id"],
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "kind": {"type": "string"},
    },
    "additionalProperties": False,
}

_TASK = {
    "type": "object",
    "required": ["task_index", "machine", "duration_s"],
    "properties": {
        "task_index": {"type": "integer", "minimum": 0},
        "name": {"type": "string"},
        "machine": {"type": "string", "minLength": 1},
        "duration_s": {"type": "integer", "minimum": 1},
        "gate": {"enum": ["timed_delay", "trajectory_done", "busy_clear"]},
        "gate_delay_s": {"type": "integer", "minimum": 0},
        "max_retries": {"type": "integer", "minimum": 0},
        "tend_machine": {"type": ["string", "null"]},
        "tool_change": {"type": "boolean"},
    },
    "additionalProperties": False,
}

_ORDER = {
    "type": "object",
    "required": ["recipe_index", "name", "tasks"],
    "properties": {
        "recipe_index": {"type": "integer", "minimum": 0},
        "name": {"type": "string"},
        "deadline_s": {"type": ["integer", "null"], "minimum": 1},
        "tasks": {"type": "array", "minItems": 1, "items": _TASK},
    },
    "additionalProperties": False,
}

MACHINES_SCHEMA = {
    "type": "object",
    "required": ["schema", "machines"],
    "properties": {
        "schema": {"const": SCHEMA_TAG},
        "machines": {"type": "array", "minItems": 1, "items": _MACHINE},
        "incompatible_pairs": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "string"},
                "minItems": 2,
                "maxItems": 2,
            },
        },
    },
    "additionalProperties": False,
}

ORDER_SCHEMA = _ORDER

ORDERS_SCHEMA = {
    "type": "object",
    "required": ["schema", "orders"],
    "properties": {
        "schema": {"const": SCHEMA_TAG},
        "orders": {"type": "array", "minItems": 1, "items": _ORDER},
    },
    "additionalProperties": False,
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["schema", "machines", "orders"],
    "properties": {
        "schema": {"const": SCHEMA_TAG},
        "machines": {"type": "array", "minItems": 1, "items": _MACHINE},
        "incompatible_pairs": MACHINES_SCHEMA["properties"]["incompatible_pairs"],
        "orders": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["at_s", "order"],
                "properties": {
                    "at_s": {"type": "number", "minimum": 0},
                    "order": _ORDER,
                },
                "additionalProperties": False,
            },
        },
        "faults": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["at_s", "recipe_index", "task_index", "kind"],
                "properties": {
                    "at_s": {"type": "number", "minimum": 0},
                    "recipe_index": {"type": "integer", "minimum": 0},
                    "task_index": {"type": "integer", "minimum": 0},
                    "kind": {"enum": ["grasp_misalignment", "machine_failure"]},
                    "detail": {"type": "string"},
                },
                "additionalProperties": False,
            },
        },
        "sim": {
            "type": "object",
            "properties": {
                "bus_latency_s": {"type": "number", "minimum": 0},
                "poll_interval_s": {"type": "number", "exclusiveMinimum": 0},
                "read_timeout_s": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {
                "time_budget_ms": {"type": "integer", "minimum": 1},
                "node_budget": {"type": "integer", "minimum": 1},
                "random_seed": {"type": "integer"},
                "branching": {
                    "enum": ["smallest_domain_first", "earliest_deadline_first"]
                },
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

_VEC = {"type": "array", "items": {"type": "number"}, "minItems": 1}

TRAJECTORY_SCHEMA = {
    "type": "object",
    "required": ["schema", "duration_s", "samples", "dims", "start", "end"],
    "properties": {
        "schema": {"const": SCHEMA_TAG},
        "duration_s": {"type": "number", "exclusiveMinimum": 0},
        "samples": {"type": "integer", "minimum": 8},
        "dims": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "minimum": 0},
        "objective": {"enum": ["l2", "linf"]},
        "start": {
            "type": "object",
            "required": ["position"],
            "properties": {
                "position": _VEC,
                "velocity": _VEC,
                "acceleration": _VEC,
            },
            "additionalProperties": False,
        },
        "end": {
            "type": "object",
            "required": ["position"],
            "properties": {
                "position": _VEC,
                "velocity": _VEC,
                "acceleration": _VEC,
            },
            "additionalProperties": False,
        },
        "via_points": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["time_fraction", "position"],
                "properties": {
                    "time_fraction": {
                        "type": "number",
                        "exclusiveMinimum": 0,
                        "exclusiveMaximum": 1,
                    },
                    "position": _VEC,
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

LAYOUT_SCHEMA = {
    "type": "object",
    "required": ["schema", "workspace", "appliances"],
    "properties": {
        "schema": {"const": SCHEMA_TAG},
        "workspace": {
            "type": "object",
            "required": ["center", "ellipsoid"],
            "properties": {
                "center": {"type": "array", "items": {"type": "number"},
                           "minItems": 3, "maxItems": 3},
                "ellipsoid": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"},
                              "minItems": 3, "maxItems": 3},
                    "minItems": 3,
                    "maxItems": 3,
                },
            },
            "additionalProperties": False,
        },
        "appliances": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "half_extents"],
                "properties": {
                    "name": {"type": "string"},
                    "half_extents": {"type": "array",
                                     "items": {"type": "number"},
                                     "minItems": 3, "maxItems": 3},
                    "z": {"type": "number"},
                    "key_point_offset": {"type": "array",
                                         "items": {"type": "number"},
                                         "minItems": 3, "maxItems": 3},
                    "corridor_cross_section": {"type": "number",
                                               "exclusiveMinimum": 0},
                },
                "additionalProperties": False,
            },
        },
        "search_radius": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}


def validate_document(doc: Any, schema: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
        )
        raise SchemaError(f"{path}: {err.message}")


def load_document(path: str | Path, schema: dict) -> dict:
    raw = Path(path).read_text()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    validate_document(doc, schema)
    return doc


def machine_from_json(doc: dict) -> Machine:
    kind = doc.get("kind", "other")
    try:
        mk = MachineKind(kind)
    except ValueError:
        mk = MachineKind.OTHER
    return Machine(id=doc["id"], kind=mk)


def machines_from_json(doc: dict) -> tuple[tuple[Machine, ...], frozenset[frozenset[str]]]:
    machines = tuple(machine_from_json(m) for m in doc["machines"])
    ids = [m.id for m in machines]
    if len(set(ids)) != len(ids):
        raise SchemaError("$.machines: duplicate machine ids")
    pairs = frozenset(
        frozenset(p) for p in doc.get("incompatible_pairs", [])
    )
    for pair in pairs:
        for mid in pair:
            if mid not in set(ids):
                raise SchemaError(
                    f"$.incompatible_pairs: unknown machine {mid}"
                )
    return machines, pairs


def task_from_json(recipe_index: int, doc: dict) -> TaskSpec:
    return TaskSpec(
        recipe_index=recipe_index,
        task_index=doc["task_index"],
        name=doc.get("name", ""),
        machine=doc["machine"],
        duration_s=doc["duration_s"],
        gate=Gate(doc.get("gate", "timed_delay")),
        gate_delay_s=doc.get("gate_delay_s", 0),
        max_retries=doc.get("max_retries", 0),
        tend_machine=doc.get("tend_machine"),
        tool_change=doc.get("tool_change", False),
    )


def order_from_json(doc: dict) -> Order:
    i = doc["recipe_index"]
    tasks = tuple(task_from_json(i, t) for t in doc["tasks"])
    return Order(
        recipe_index=i,
        name=doc["name"],
        tasks=tasks,
        deadline_s=doc.get("deadline_s"),
    )


def orders_from_json(doc: dict) -> tuple[Order, ...]:
    return tuple(order_from_json(o) for o in doc["orders"])


def order_to_json(order: Order) -> dict:
    return {
        "recipe_index": order.recipe_index,
        "name": order.name,
        "deadline_s": order.deadline_s,
        "tasks": [
            {
                "task_index": t.task_index,
                "name": t.name,
                "machine": t.machine,
                "duration_s": t.duration_s,
                "gate": t.gate.value,
                "gate_delay_s": t.gate_delay_s,
                "max_retries": t.max_retries,
                "tend_machine": t.tend_machine,
                "tool_change": t.tool_change,
            }
            for t in order.tasks
        ],
    }


def trajectory_problem_from_json(doc: dict):
    """Build a solver problem from a validated trajectory document."""
    from .trajectory import BoundaryState, TrajectoryProblem

    validate_document(doc, TRAJECTORY_SCHEMA)
    dims = doc["dims"]

    def boundary(section: dict) -> BoundaryState:
        pos = section["position"]
        if len(pos) != dims:
            raise SchemaError("boundary position length does not match dims")
        return BoundaryState(
            position=tuple(float(p) for p in pos),
            velocity=tuple(float(v) for v in section.get("velocity", [0.0] * dims)),
            acceleration=tuple(
                float(a) for a in section.get("acceleration", [0.0] * dims)
            ),
        )

    return TrajectoryProblem(
        duration_s=float(doc["duration_s"]),
        samples=int(doc["samples"]),
        start=boundary(doc["start"]),
        end=boundary(doc["end"]),
        via_points=tuple(
            (float(v["time_fraction"]), tuple(float(p) for p in v["position"]))
            for v in doc.get("via_points", [])
        ),
        alpha=float(doc.get("alpha", 0.0)),
    )


def layout_problem_from_json(doc: dict):
    """Build a layout problem from a validated layout document."""
    from .layout import ApplianceSpec, LayoutProblem

    validate_document(doc, LAYOUT_SCHEMA)
    appliances = []
    for a in doc["appliances"]:
        cross = float(a.get("corridor_cross_section", 0.15))
        appliances.append(
            ApplianceSpec(
                name=a["name"],
                half_extents=tuple(float(h) for h in a["half_extents"]),
                z=float(a.get("z", 0.0)),
                key_point_offset=tuple(
                    float(o) for o in a.get("key_point_offset", (0.0, 0.0, 0.0))
                ),
                corridor_cross_section=(cross, cross),
            )
        )
    return LayoutProblem(
        appliances=tuple(appliances),
        workspace_center=tuple(float(c) for c in doc["workspace"]["center"]),
        workspace_matrix=tuple(
            tuple(float(x) for x in row) for row in doc["workspace"]["ellipsoid"]
        ),
        search_radius=float(doc.get("search_radius", 2.0)),
    )
