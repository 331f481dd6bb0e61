"""Kitchen layout optimization.

Places appliance bodies (oriented boxes) around a manipulator workspace so
that each appliance's key point — the end-effector target on the appliance —
is as close as possible to the workspace center, subject to:

* every key point staying inside the workspace ellipsoid,
* no body-body overlaps, and
* no body overlapping another appliance's arm corridor (the box swept
  between that appliance's key point and the workspace center).

Overlap is decided by the separating-axis test over the 15 candidate axes
of a box pair; the reported depth is the minimum translation distance.
The solver is simulated annealing over per-appliance (x, y, yaw)
placements with penalty-augmented cost, deterministic per seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Obb",
    "ApplianceSpec",
    "LayoutProblem",
    "Placement",
    "Layout",
    "LayoutReport",
    "AnnealConfig",
    "NoFeasibleFound",
    "obb_overlap",
    "corridor_box",
    "evaluate_layout",
    "optimize_layout",
]


class NoFeasibleFound(RuntimeError):
    """Annealing budget exhausted without a feasible layout."""

    def __init__(self, message: str, best: Optional["Layout"] = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class Obb:
    center: tuple[float, float, float]
    half_extents: tuple[float, float, float]
    rotation: tuple[tuple[float, ...], ...] = (
        (1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, 0.0, 1.0),
    )

    def __post_init__(self) -> None:
        if any(h <= 0 for h in self.half_extents):
            raise ValueError("half extents must be positive")
        R = np.asarray(self.rotation, dtype=float)
        if R.shape != (3, 3) or not np.allclose(R @ R.T, np.eye(3), atol=1e-9):
            raise ValueError("rotation must be orthonormal")

    @property
    def r(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=float)

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @property
    def h(self) -> np.ndarray:
        return np.asarray(self.half_extents, dtype=float)


def _sat_depth(ca, ha, ra, cb, hb, rb) -> float:
    # Scalar separating-axis test; kept free of array allocations because it
    # sits in the annealer's innermost loop.
    ax = [(ra[0][i], ra[1][i], ra[2][i]) for i in range(3)]
    bx = [(rb[0][i], rb[1][i], rb[2][i]) for i in range(3)]
    t = (cb[0] - ca[0], cb[1] - ca[1], cb[2] - ca[2])
    axes = list(ax) + list(bx)
    for ux, uy, uz in ax:
        for vx, vy, vz in bx:
            cx = uy * vz - uz * vy
            cy = uz * vx - ux * vz
            cz = ux * vy - uy * vx
            n = math.sqrt(cx * cx + cy * cy + cz * cz)
            if n > 1e-12:
                axes.append((cx / n, cy / n, cz / n))
    depth = math.inf
    for x, y, z in axes:
        proj_a = sum(
            ha[i] * abs(x * ax[i][0] + y * ax[i][1] + z * ax[i][2])
            for i in range(3)
        )
        proj_b = sum(
            hb[i] * abs(x * bx[i][0] + y * bx[i][1] + z * bx[i][2])
            for i in range(3)
        )
        gap = proj_a + proj_b - abs(x * t[0] + y * t[1] + z * t[2])
        if gap <= 0:
            return 0.0
        if gap < depth:
            depth = gap
    return depth


def obb_overlap(a: Obb, b: Obb) -> float:
    """0 if a separating axis exists, else the minimum translation depth."""
    return _sat_depth(a.c, a.h, a.r, b.c, b.h, b.r)


def _rot_z(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class ApplianceSpec:
    name: str
    half_extents: tuple[float, float, float]
    z: float = 0.0
    # Key point in the appliance frame (end-effector target on the appliance).
    key_point_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    # Corridor cross-section half-extents (two directions orthogonal to the
    # key-point-to-center axis).
    corridor_cross_section: tuple[float, float] = (0.15, 0.15)


@dataclass(frozen=True)
class LayoutProblem:
    appliances: tuple[ApplianceSpec, ...]
    workspace_center: tuple[float, float, float]
    # SPD matrix A of the workspace ellipsoid (p - v)^T A (p - v) <= 1.
    workspace_matrix: tuple[tuple[float, ...], ...]
    search_radius: float = 2.0

    def __post_init__(self) -> None:
        A = np.asarray(self.workspace_matrix, dtype=float)
        if A.shape != (3, 3) or not np.allclose(A, A.T, atol=1e-9):
            raise ValueError("workspace matrix must be symmetric 3x3")
        if np.any(np.linalg.eigvalsh(A) <= 0):
            raise ValueError("workspace matrix must be positive definite")


@dataclass(frozen=True)
class Placement:
    x: float
    y: float
    yaw: float = 0.0


@dataclass(frozen=True)
class LayoutReport:
    ellipsoid: tuple[tuple[str, float], ...]  # (appliance, positive margin)
    body_body: tuple[tuple[str, str, float], ...]
    body_corridor: tuple[tuple[str, str, float], ...]

    @property
    def feasible(self) -> bool:
        return not (self.ellipsoid or self.body_body or self.body_corridor)

    def total_violation(self) -> float:
        return (
            sum(m for _, m in self.ellipsoid)
            + sum(d for _, _, d in self.body_body)
            + sum(d for _, _, d in self.body_corridor)
        )


@dataclass(frozen=True)
class Layout:
    placements: tuple[Placement, ...]
    objective: float
    report: LayoutReport


def _body_raw(spec: ApplianceSpec, placement: Placement):
    R = _rot_z(placement.yaw)
    c = np.array([placement.x, placement.y, spec.z])
    return c, np.asarray(spec.half_extents, dtype=float), R


def _key_point_raw(spec: ApplianceSpec, placement: Placement) -> np.ndarray:
    c, _, R = _body_raw(spec, placement)
    return c + R @ np.asarray(spec.key_point_offset)


def _corridor_raw(spec: ApplianceSpec, placement: Placement, v: np.ndarray):
    p = _key_point_raw(spec, placement)
    d = v - p
    length = float(np.linalg.norm(d))
    if length < 1e-9:
        axis = np.array([1.0, 0.0, 0.0])
        length = 1e-9
    else:
        axis = d / length
    # Orthonormal frame with the first column along the corridor axis.
    ref = np.array([0.0, 0.0, 1.0])
    if abs(float(axis @ ref)) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    u = np.cross(axis, ref)
    u /= np.linalg.norm(u)
    w = np.cross(axis, u)
    R = np.column_stack([axis, u, w])
    cw, ch = spec.corridor_cross_section
    return (p + v) / 2, np.array([length / 2, cw, ch]), R


def _to_obb(raw) -> Obb:
    c, h, R = raw
    return Obb(tuple(c), tuple(h), tuple(tuple(row) for row in R))


def body_box(spec: ApplianceSpec, placement: Placement) -> Obb:
    return _to_obb(_body_raw(spec, placement))


def key_point(spec: ApplianceSpec, placement: Placement) -> np.ndarray:
    return _key_point_raw(spec, placement)


def corridor_box(
    spec: ApplianceSpec, placement: Placement, center_v: Sequence[float]
) -> Obb:
    """Box swept from the appliance key point to the workspace center."""
    return _to_obb(_corridor_raw(spec, placement, np.asarray(center_v, dtype=float)))


def evaluate_layout(
    problem: LayoutProblem, placements: Sequence[Placement]
) -> tuple[float, LayoutReport]:
    if len(placements) != len(problem.appliances):
        raise ValueError("placement count does not match appliance count")
    v = np.asarray(problem.workspace_center, dtype=float)
    A = np.asarray(problem.workspace_matrix, dtype=float)
    bodies, corridors, keys = [], [], []
    for spec, pl in zip(problem.appliances, placements):
        bodies.append(_body_raw(spec, pl))
        corridors.append(_corridor_raw(spec, pl, v))
        keys.append(_key_point_raw(spec, pl))
    objective = float(sum(np.linalg.norm(k - v) for k in keys))
    ell = []
    for spec, k in zip(problem.appliances, keys):
        margin = float((k - v) @ A @ (k - v)) - 1.0
        if margin > 1e-9:
            ell.append((spec.name, margin))
    body_body = []
    body_corridor = []
    n = len(bodies)
    for i in range(n):
        for j in range(i + 1, n):
            depth = _sat_depth(*bodies[i], *bodies[j])
            if depth > 1e-9:
                body_body.append(
                    (problem.appliances[i].name, problem.appliances[j].name, depth)
                )
    for i in range(n):
        for j in range(n):
            if i == j:
                continue  # an appliance may touch its own corridor
            depth = _sat_depth(*bodies[i], *corridors[j])
            if depth > 1e-9:
                body_corridor.append(
                    (problem.appliances[i].name, problem.appliances[j].name, depth)
                )
    return objective, LayoutReport(
        ellipsoid=tuple(ell),
        body_body=tuple(body_body),
        body_corridor=tuple(body_corridor),
    )


@dataclass(frozen=True)
class AnnealConfig:
    iterations: int = 6000
    restarts: int = 2
    initial_temperature: float = 1.0
    final_temperature: float = 1e-3
    position_step: float = 0.15
    yaw_step: float = 0.3
    penalty_weight: float = 1e3
    # Smallest step of the greedy polish pass that follows annealing.
    polish_min_step: float = 1e-4


def _penalized_cost(
    problem: LayoutProblem, placements: list[Placement], weight: float
) -> tuple[float, float, LayoutReport]:
    objective, report = evaluate_layout(problem, placements)
    return objective + weight * report.total_violation(), objective, report


def optimize_layout(
    problem: LayoutProblem,
    seed: int = 0,
    config: AnnealConfig = AnnealConfig(),
) -> Layout:
    """Simulated annealing over placements; deterministic per seed.

    Returns the best feasible layout found across restarts, or raises
    :class:`NoFeasibleFound` carrying the least-infeasible candidate.
    """
    rng = random.Random(seed)
    v = np.asarray(problem.workspace_center, dtype=float)
    n = len(problem.appliances)
    best_feasible: Optional[Layout] = None
    best_any: Optional[Layout] = None
    best_any_cost = math.inf

    for _restart in range(config.restarts):
        placements = [
            Placement(
                x=float(v[0] + rng.uniform(-1, 1) * problem.search_radius),
                y=float(v[1] + rng.uniform(-1, 1) * problem.search_radius),
                yaw=rng.uniform(-math.pi, math.pi),
            )
            for _ in range(n)
        ]
        cost, objective, report = _penalized_cost(
            problem, placements, config.penalty_weight
        )
        t0, t1 = config.initial_temperature, config.final_temperature
        for it in range(config.iterations):
            temperature = t0 * (t1 / t0) ** (it / max(config.iterations - 1, 1))
            idx = rng.randrange(n)
            old = placements[idx]
            scale = max(temperature, 0.05)
            placements[idx] = Placement(
                x=old.x + rng.gauss(0.0, config.position_step * scale),
                y=old.y + rng.gauss(0.0, config.position_step * scale),
                yaw=old.yaw + rng.gauss(0.0, config.yaw_step * scale),
            )
            new_cost, new_objective, new_report = _penalized_cost(
                problem, placements, config.penalty_weight
            )
            delta = new_cost - cost
            if delta <= 0 or rng.random() < math.exp(-delta / max(temperature, 1e-9)):
                cost, objective, report = new_cost, new_objective, new_report
            else:
                placements[idx] = old
                continue
            if report.feasible and (
                best_feasible is None or objective < best_feasible.objective
            ):
                best_feasible = Layout(tuple(placements), objective, report)
            if cost < best_any_cost:
                best_any_cost = cost
                best_any = Layout(tuple(placements), objective, report)
    if best_feasible is not None:
        best_feasible = _polish(problem, best_feasible, config)
    if best_feasible is None:
        summary = "no feasible layout found"
        if best_any is not None:
            summary += (
                f"; best candidate J={best_any.objective:.3f} with "
                f"violation {best_any.report.total_violation():.3f}"
            )
        raise NoFeasibleFound(summary, best=best_any)
    return best_feasible


def _polish(problem: LayoutProblem, layout: Layout, config: AnnealConfig) -> Layout:
    """Deterministic coordinate descent that only takes feasible improvements."""
    placements = list(layout.placements)
    objective, report = layout.objective, layout.report
    step = config.position_step
    while step >= config.polish_min_step:
        improved = False
        for idx in range(len(placements)):
            for dx, dy, dyaw in (
                (step, 0, 0), (-step, 0, 0), (0, step, 0), (0, -step, 0),
                (0, 0, step), (0, 0, -step),
            ):
                old = placements[idx]
                placements[idx] = Placement(old.x + dx, old.y + dy, old.yaw + dyaw)
                new_objective, new_report = evaluate_layout(problem, placements)
                if new_report.feasible and new_objective < objective - 1e-12:
                    objective, report = new_objective, new_report
                    improved = True
                else:
                    placements[idx] = old
        if not improved:
            step /= 2
    return Layout(tuple(placements), objective, report)
