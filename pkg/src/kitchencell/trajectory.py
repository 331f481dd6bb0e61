"""Via-point trajectory generation by smoothness-optimal programming.

A trajectory is discretized as a triple-integrator chain sampled at N
uniform nodes, with jerk varying linearly between nodes.  Position,
velocity and acceleration at consecutive nodes are linked by the exact
integrals of that piecewise-linear jerk, so the stored profiles are
mutually consistent by construction.  Two solvers are provided:

* :func:`solve_min_jerk` minimizes the integral of squared jerk plus a
  weighted integral of squared acceleration, subject to boundary
  conditions and positional via points, by a dense KKT solve.
* :func:`solve_min_jerk_linf` minimizes the peak jerk magnitude under the
  same constraints via an epigraph linear program, which produces
  bang-bang style jerk profiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "BoundaryState",
    "TrajectoryProblem",
    "Trajectory",
    "TrajectoryError",
    "solve_min_jerk",
    "solve_min_jerk_linf",
    "evaluate",
]


class TrajectoryError(ValueError):
    """Ill-posed trajectory problem (inconsistent or degenerate constraints)."""


@dataclass(frozen=True)
class BoundaryState:
    """Position/velocity/acceleration per coordinate at one endpoint."""

    position: tuple[float, ...]
    velocity: tuple[float, ...]
    acceleration: tuple[float, ...]

    @staticmethod
    def rest(position: Sequence[float]) -> "BoundaryState":
        dims = len(position)
        return BoundaryState(
            position=tuple(float(p) for p in position),
            velocity=(0.0,) * dims,
            acceleration=(0.0,) * dims,
        )


@dataclass(frozen=True)
class TrajectoryProblem:
    duration_s: float
    samples: int
    start: BoundaryState
    end: BoundaryState
    via_points: tuple[tuple[float, tuple[float, ...]], ...] = ()
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise TrajectoryError("duration must be positive")
        if self.samples < 8:
            raise TrajectoryError("need at least 8 samples")
        if self.alpha < 0:
            raise TrajectoryError("alpha must be nonnegative")
        dims = self.dims
        for state in (self.start, self.end):
            if not (
                len(state.position)
                == len(state.velocity)
                == len(state.acceleration)
                == dims
            ):
                raise TrajectoryError("boundary state dimensions disagree")
        fractions = [f for f, _ in self.via_points]
        if any(not (0.0 < f < 1.0) for f in fractions):
            raise TrajectoryError("via time fractions must lie strictly in (0, 1)")
        if any(b <= a for a, b in zip(fractions, fractions[1:])):
            raise TrajectoryError("via time fractions must be strictly increasing")
        for _, pos in self.via_points:
            if len(pos) != dims:
                raise TrajectoryError("via point dimension mismatch")
        indices = self.via_sample_indices()
        if len(set(indices)) != len(indices):
            raise TrajectoryError(
                "sample grid too coarse: two via points map to the same sample"
            )
        if any(i in (0, self.samples - 1) for i in indices):
            raise TrajectoryError("via point coincides with a boundary sample")

    @property
    def dims(self) -> int:
        return len(self.start.position)

    def via_sample_indices(self) -> list[int]:
        return [
            int(round(f * (self.samples - 1))) for f, _ in self.via_points
        ]


@dataclass(frozen=True)
class Trajectory:
    """Sampled profiles; arrays have shape (samples, dims)."""

    times: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    jerk: np.ndarray
    objective: float

    @property
    def duration_s(self) -> float:
        return float(self.times[-1])


# ---------------------------------------------------------------------------
# Discretization
#
# Per coordinate, the unknown vector stacks [x, v, a, j], each of length N.
# Jerk is piecewise linear between nodes; integrating it exactly over one
# step h links consecutive states:
#
#   a_{k+1} = a_k + h (j_k + j_{k+1}) / 2
#   v_{k+1} = v_k + h a_k + h^2 (j_k / 3 + j_{k+1} / 6)
#   x_{k+1} = x_k + h v_k + h^2 a_k / 2 + h^3 (j_k / 8 + j_{k+1} / 24)
#
# and the exact integral of squared jerk over the step is
# h (j_k^2 + j_k j_{k+1} + j_{k+1}^2) / 3.


def _dynamics_rows(n_samples: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    n = 4 * n_samples
    x0, v0, a0, j0 = 0, n_samples, 2 * n_samples, 3 * n_samples
    rows = np.zeros((3 * (n_samples - 1), n))
    r = 0
    for k in range(n_samples - 1):
        rows[r, [a0 + k + 1, a0 + k, j0 + k, j0 + k + 1]] = [1, -1, -h / 2, -h / 2]
        rows[r + 1, [v0 + k + 1, v0 + k, a0 + k, j0 + k, j0 + k + 1]] = [
            1, -1, -h, -h * h / 3, -h * h / 6,
        ]
        rows[r + 2, [x0 + k + 1, x0 + k, v0 + k, a0 + k, j0 + k, j0 + k + 1]] = [
            1, -1, -h, -h * h / 2, -h ** 3 / 8, -h ** 3 / 24,
        ]
        r += 3
    return rows, np.zeros(3 * (n_samples - 1))


def _constraints_for_dim(
    problem: TrajectoryProblem, dim: int
) -> tuple[np.ndarray, np.ndarray]:
    n_samples = problem.samples
    h = problem.duration_s / (n_samples - 1)
    x0, v0, a0 = 0, n_samples, 2 * n_samples
    dyn, dyn_b = _dynamics_rows(n_samples, h)
    extra: list[tuple[int, float]] = [
        (x0, problem.start.position[dim]),
        (v0, problem.start.velocity[dim]),
        (a0, problem.start.acceleration[dim]),
        (x0 + n_samples - 1, problem.end.position[dim]),
        (v0 + n_samples - 1, problem.end.velocity[dim]),
        (a0 + n_samples - 1, problem.end.acceleration[dim]),
    ]
    for (_, pos), k in zip(problem.via_points, problem.via_sample_indices()):
        extra.append((x0 + k, pos[dim]))
    rows = np.zeros((dyn.shape[0] + len(extra), 4 * n_samples))
    rhs = np.zeros(rows.shape[0])
    rows[: dyn.shape[0]] = dyn
    rhs[: dyn.shape[0]] = dyn_b
    for i, (col, val) in enumerate(extra, start=dyn.shape[0]):
        rows[i, col] = 1.0
        rhs[i] = val
    return rows, rhs


def _objective_matrix(problem: TrajectoryProblem) -> np.ndarray:
    n_samples = problem.samples
    h = problem.duration_s / (n_samples - 1)
    a0, j0 = 2 * n_samples, 3 * n_samples
    H = np.zeros((4 * n_samples, 4 * n_samples))
    for k in range(n_samples - 1):
        H[j0 + k, j0 + k] += 2 * h / 3
        H[j0 + k + 1, j0 + k + 1] += 2 * h / 3
        H[j0 + k, j0 + k + 1] += h / 3
        H[j0 + k + 1, j0 + k] += h / 3
    if problem.alpha > 0:
        for k in range(n_samples):
            w = h if 0 < k < n_samples - 1 else h / 2
            H[a0 + k, a0 + k] += 2 * problem.alpha * w
    return H


def _unpack(problem: TrajectoryProblem, per_dim: list[np.ndarray]) -> Trajectory:
    n_samples = problem.samples
    times = np.linspace(0.0, problem.duration_s, n_samples)
    stacked = np.stack(per_dim, axis=1)  # (4N, dims)
    return Trajectory(
        times=times,
        position=stacked[:n_samples],
        velocity=stacked[n_samples : 2 * n_samples],
        acceleration=stacked[2 * n_samples : 3 * n_samples],
        jerk=stacked[3 * n_samples :],
        objective=0.0,
    )


def _check_residual(rows: np.ndarray, rhs: np.ndarray, z: np.ndarray) -> None:
    residual = float(np.max(np.abs(rows @ z - rhs))) if rows.size else 0.0
    if residual > 1e-9:
        raise TrajectoryError(f"constraint residual {residual:.3e} exceeds 1e-9")


def solve_min_jerk(problem: TrajectoryProblem) -> Trajectory:
    """Minimize integral jerk^2 + alpha * integral acceleration^2.

    Coordinates are independent, so one KKT system is solved per dimension
    and objective values are summed.
    """
    H = _objective_matrix(problem)
    per_dim: list[np.ndarray] = []
    objective = 0.0
    for dim in range(problem.dims):
        rows, rhs = _constraints_for_dim(problem, dim)
        m = rows.shape[0]
        kkt = np.block([[H, rows.T], [rows, np.zeros((m, m))]])
        target = np.concatenate([np.zeros(4 * problem.samples), rhs])
        try:
            sol = np.linalg.solve(kkt, target)
        except np.linalg.LinAlgError as exc:
            raise TrajectoryError(f"singular KKT system: {exc}") from exc
        z = sol[: 4 * problem.samples]
        _check_residual(rows, rhs, z)
        per_dim.append(z)
        objective += 0.5 * float(z @ H @ z)
    out = _unpack(problem, per_dim)
    return Trajectory(
        times=out.times,
        position=out.position,
        velocity=out.velocity,
        acceleration=out.acceleration,
        jerk=out.jerk,
        objective=objective,
    )


def solve_min_jerk_linf(problem: TrajectoryProblem) -> Trajectory:
    """Minimize the peak jerk magnitude over all samples and coordinates.

    Epigraph form: one scalar bound s with -s <= j <= s elementwise, all
    dimensions sharing s, solved as a single linear program.
    """
    n_samples = problem.samples
    n = 4 * n_samples
    dims = problem.dims
    j0 = 3 * n_samples
    # Variables: [state_dim0, ..., state_dim{D-1}, s]
    total = n * dims + 1
    eq_rows = []
    eq_rhs = []
    for dim in range(dims):
        rows, rhs = _constraints_for_dim(problem, dim)
        padded = np.zeros((rows.shape[0], total))
        padded[:, dim * n : (dim + 1) * n] = rows
        eq_rows.append(padded)
        eq_rhs.append(rhs)
    a_eq = np.vstack(eq_rows)
    b_eq = np.concatenate(eq_rhs)
    # |j_k| <= s for every jerk sample of every dimension.
    ub_rows = np.zeros((2 * n_samples * dims, total))
    r = 0
    for dim in range(dims):
        base = dim * n + j0
        for k in range(n_samples):
            ub_rows[r, base + k] = 1.0
            ub_rows[r, -1] = -1.0
            ub_rows[r + 1, base + k] = -1.0
            ub_rows[r + 1, -1] = -1.0
            r += 2
    cost = np.zeros(total)
    cost[-1] = 1.0
    result = linprog(
        cost,
        A_ub=ub_rows,
        b_ub=np.zeros(ub_rows.shape[0]),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(None, None)] * (total - 1) + [(0, None)],
        method="highs",
    )
    if not result.success:
        raise TrajectoryError(f"peak-jerk LP failed: {result.message}")
    z = result.x
    per_dim = [z[dim * n : (dim + 1) * n] for dim in range(dims)]
    for dim in range(dims):
        rows, rhs = _constraints_for_dim(problem, dim)
        _check_residual(rows, rhs, per_dim[dim])
    out = _unpack(problem, per_dim)
    return Trajectory(
        times=out.times,
        position=out.position,
        velocity=out.velocity,
        acceleration=out.acceleration,
        jerk=out.jerk,
        objective=float(z[-1]),
    )


def evaluate(
    trajectory: Trajectory, t_s: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Linearly interpolate (position, velocity, acceleration) at ``t_s``."""
    times = trajectory.times
    if not (times[0] - 1e-12 <= t_s <= times[-1] + 1e-12):
        raise TrajectoryError(f"time {t_s} outside [0, {times[-1]}]")
    t = min(max(t_s, float(times[0])), float(times[-1]))
    out = []
    for arr in (trajectory.position, trajectory.velocity, trajectory.acceleration):
        cols = [np.interp(t, times, arr[:, d]) for d in range(arr.shape[1])]
        out.append(np.array(cols))
    return out[0], out[1], out[2]
