"""Serial-chain arm dynamics, torque analysis and payload estimation.

The torque-critical joints of the arm are the three pitch joints
(shoulder, elbow, wrist), which share the vertical plane that sees the
worst-case gravity loading.  Dynamics are modeled over that pitch chain
with each link as a point mass at its center of mass; actuator masses are
lumped at their mounting points (the elbow actuator is mounted back at
the shoulder joint and therefore contributes no moving mass, while the
two wrist actuators ride at the wrist joint).

Two independent inverse-dynamics paths are provided and must agree: an
explicit assembly of the mass matrix, Coriolis matrix (Christoffel
symbols via complex-step differentiation of M) and gravity vector, and a
recursive Newton-Euler sweep over the point masses.

Cartesian impedance uses the full 5-DoF arm kinematics (shoulder yaw,
shoulder pitch, elbow pitch, wrist pitch, wrist roll) with the yaw and
roll joints contributing to the Jacobian but not to gravity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Link",
    "ArmModel",
    "JointState",
    "CartesianTarget",
    "PayloadEstimate",
    "mass_matrix",
    "coriolis_matrix",
    "gravity_vector",
    "inverse_dynamics",
    "inverse_dynamics_newton_euler",
    "forward_kinematics",
    "impedance_torque",
    "static_worstcase_torques",
    "estimate_payload",
    "joint_limit_violations",
    "PITCH_JOINTS",
    "ARM_JOINTS",
]

GRAVITY = 9.81

PITCH_JOINTS = ("shoulder_pitch", "elbow_pitch", "wrist_pitch")
ARM_JOINTS = (
    "shoulder_yaw",
    "shoulder_pitch",
    "elbow_pitch",
    "wrist_pitch",
    "wrist_roll",
)


@dataclass(frozen=True)
class Link:
    name: str
    mass_kg: float
    length_m: float
    com_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.mass_kg <= 0 or self.length_m <= 0:
            raise ValueError("link mass and length must be positive")
        if not (0.0 <= self.com_fraction <= 1.0):
            raise ValueError("center-of-mass fraction must lie in [0, 1]")


@dataclass(frozen=True)
class ArmModel:
    """Mechanical parameters; defaults match the deployed arm."""

    # Links driven by the pitch chain, proximal to distal.
    links: tuple[Link, ...] = (
        Link("upper_arm", 1.570, 0.400),
        Link("forearm", 0.854, 0.375),
        Link("wrist", 0.733, 0.085),
    )
    # Proximal structure ahead of the shoulder pitch joint (not part of the
    # moving chain; kept for completeness of the mechanical description).
    proximal_links: tuple[Link, ...] = (
        Link("clavicle", 1.457, 0.420),
        Link("shoulder", 2.154, 0.150),
    )
    # Moving actuator masses lumped at the wrist joint (wrist pitch + roll).
    wrist_actuator_mass_kg: float = 2 * 0.250
    gravity: float = GRAVITY
    # Per pitch joint: (continuous Nm, peak Nm).  The shoulder and elbow
    # pitch joints share the same actuator type; the wrist uses a smaller one.
    torque_ratings: dict = field(
        default_factory=lambda: {
            "shoulder_pitch": (33.0, 67.0),
            "elbow_pitch": (33.0, 67.0),
            "wrist_pitch": (4.2, 10.5),
        }
    )
    # Joint range of motion in degrees, (min, max).
    joint_limits_deg: dict = field(
        default_factory=lambda: {
            "torso_yaw": (-180.0, 180.0),
            "shoulder_yaw": (-130.0, 130.0),
            "shoulder_pitch": (-180.0, 180.0),
            "elbow_pitch": (-150.0, 95.0),
            "wrist_pitch": (-133.0, 111.0),
            "wrist_roll": (-180.0, 180.0),
        }
    )

    @property
    def reach_m(self) -> float:
        return sum(l.length_m for l in self.links)

    def point_masses(self) -> list[tuple[float, int, float]]:
        """(mass, link index, offset from that link's joint) triples."""
        out = [
            (link.mass_kg, i, link.com_fraction * link.length_m)
            for i, link in enumerate(self.links)
        ]
        # Wrist actuators sit at the wrist joint = far end of the forearm.
        out.append((self.wrist_actuator_mass_kg, 1, self.links[1].length_m))
        return out


@dataclass(frozen=True)
class JointState:
    q: tuple[float, ...]
    qd: tuple[float, ...] = ()
    qdd: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        n = len(self.q)
        if not self.qd:
            object.__setattr__(self, "qd", (0.0,) * n)
        if not self.qdd:
            object.__setattr__(self, "qdd", (0.0,) * n)
        if len(self.qd) != n or len(self.qdd) != n:
            raise ValueError("joint state dimensions disagree")


@dataclass(frozen=True)
class CartesianTarget:
    x_d: tuple[float, float, float]
    xd_d: tuple[float, float, float] = (0.0, 0.0, 0.0)
    stiffness: np.ndarray = field(default_factory=lambda: 100.0 * np.eye(3))
    damping: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    f_tip: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        K = np.asarray(self.stiffness, dtype=float)
        D = np.asarray(self.damping, dtype=float)
        if not np.allclose(K, K.T) or np.any(np.linalg.eigvalsh(K) <= 0):
            raise ValueError("stiffness must be symmetric positive definite")
        if not np.allclose(D, D.T) or np.any(np.linalg.eigvalsh(D) < -1e-12):
            raise ValueError("damping must be symmetric positive semidefinite")


# ---------------------------------------------------------------------------
# Planar pitch-chain dynamics (x horizontal, y up; q = 0 is fully horizontal)


def _point_positions(model: ArmModel, q) -> list:
    """Positions of all point masses; supports complex q for complex step."""
    theta = np.cumsum(np.asarray(q))
    joints = [np.zeros(2, dtype=theta.dtype)]
    for i, link in enumerate(model.links):
        u = np.array([np.cos(theta[i]), np.sin(theta[i])])
        joints.append(joints[-1] + link.length_m * u)
    points = []
    for mass, i, offset in model.point_masses():
        u = np.array([np.cos(theta[i]), np.sin(theta[i])])
        points.append((mass, joints[i] + offset * u))
    return points


def _point_jacobians(model: ArmModel, q) -> list:
    """Per point mass: (mass, 2 x n position Jacobian)."""
    theta = np.cumsum(np.asarray(q))
    n = len(q)
    joints = [np.zeros(2, dtype=theta.dtype)]
    for i, link in enumerate(model.links):
        u = np.array([np.cos(theta[i]), np.sin(theta[i])])
        joints.append(joints[-1] + link.length_m * u)
    out = []
    for mass, i, offset in model.point_masses():
        u = np.array([np.cos(theta[i]), np.sin(theta[i])])
        p = joints[i] + offset * u
        J = np.zeros((2, n), dtype=theta.dtype)
        # Joint j rotates every point distal to it about the joint origin.
        for j in range(i + 1):
            r = p - joints[j]
            J[0, j] = -r[1]
            J[1, j] = r[0]
        out.append((mass, J))
    return out


def mass_matrix(model: ArmModel, q: Sequence[float]) -> np.ndarray:
    n = len(q)
    M = np.zeros((n, n), dtype=np.asarray(q).dtype)
    for mass, J in _point_jacobians(model, q):
        M += mass * (J.T @ J)
    return M


def gravity_vector(model: ArmModel, q: Sequence[float]) -> np.ndarray:
    n = len(q)
    g = np.zeros(n)
    for mass, J in _point_jacobians(model, q):
        g += mass * model.gravity * J[1]
    return g


def potential_energy(model: ArmModel, q: Sequence[float]) -> float:
    return sum(
        mass * model.gravity * float(p[1]) for mass, p in _point_positions(model, q)
    )


def coriolis_matrix(
    model: ArmModel, q: Sequence[float], qd: Sequence[float]
) -> np.ndarray:
    """Christoffel-symbol Coriolis matrix (makes dM/dt - 2C skew-symmetric)."""
    n = len(q)
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    dM = np.zeros((n, n, n))  # dM[i, j, k] = dM_ij/dq_k
    h = 1e-30
    for k in range(n):
        qc = q.astype(complex)
        qc[k] += 1j * h
        dM[:, :, k] = np.imag(mass_matrix(model, qc)) / h
    C = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                C[i, j] += 0.5 * (dM[i, j, k] + dM[i, k, j] - dM[j, k, i]) * qd[k]
    return C


def tip_jacobian(model: ArmModel, q: Sequence[float]) -> np.ndarray:
    """Planar tip Jacobian: rows are dx/dq, dy/dq, dyaw/dq."""
    theta = np.cumsum(np.asarray(q, dtype=float))
    n = len(q)
    joints = [np.zeros(2)]
    for i, link in enumerate(model.links):
        u = np.array([np.cos(theta[i]), np.sin(theta[i])])
        joints.append(joints[-1] + link.length_m * u)
    tip = joints[-1]
    J = np.zeros((3, n))
    for j in range(n):
        r = tip - joints[j]
        J[0, j] = -r[1]
        J[1, j] = r[0]
        J[2, j] = 1.0
    return J


def inverse_dynamics(
    model: ArmModel,
    state: JointState,
    f_tip: Sequence[float] = (0.0, 0.0, 0.0),
) -> np.ndarray:
    """Joint torques M(q) qdd + C(q, qd) qd + g(q) + J^T f_tip."""
    q, qd, qdd = map(np.asarray, (state.q, state.qd, state.qdd))
    if len(q) != len(model.links):
        raise ValueError("state dimension does not match the pitch chain")
    M = mass_matrix(model, q)
    C = coriolis_matrix(model, q, qd)
    g = gravity_vector(model, q)
    tau = M @ qdd + C @ qd + g
    f = np.asarray(f_tip, dtype=float)
    if f.shape != (3,):
        raise ValueError("tip wrench must be (fx, fy, moment)")
    return tau + tip_jacobian(model, q).T @ f


def inverse_dynamics_newton_euler(
    model: ArmModel,
    state: JointState,
    f_tip: Sequence[float] = (0.0, 0.0, 0.0),
) -> np.ndarray:
    """Independent inverse-dynamics path: Newton-Euler over the point masses.

    Forward sweep propagates joint-origin accelerations (with gravity folded
    into the base acceleration); the backward sweep sums moments of the
    inertial forces about each joint.
    """
    q = np.asarray(state.q, dtype=float)
    qd = np.asarray(state.qd, dtype=float)
    qdd = np.asarray(state.qdd, dtype=float)
    n = len(q)
    theta = np.cumsum(q)
    omega = np.cumsum(qd)
    alpha = np.cumsum(qdd)

    def spin(w, r):  # planar omega x r
        return np.array([-w * r[1], w * r[0]])

    joints = [np.zeros(2)]
    # Base "acceleration" trick: accelerating the base upward at g makes the
    # inertial forces include weight.
    acc = [np.array([0.0, model.gravity])]
    for i, link in enumerate(model.links):
        u = np.array([np.cos(theta[i]), np.sin(theta[i])])
        r = link.length_m * u
        joints.append(joints[-1] + r)
        acc.append(acc[-1] + spin(alpha[i], r) - omega[i] ** 2 * r)
    forces = []  # (application point, inertial force) per mass
    for mass, i, offset in model.point_masses():
        u = np.array([np.cos(theta[i]), np.sin(theta[i])])
        r = offset * u
        p = joints[i] + r
        a = acc[i] + spin(alpha[i], r) - omega[i] ** 2 * r
        forces.append((p, mass * a))
    # Joint j carries the moment of every inertial force distal to it;
    # masses on links proximal to j do not move with q_j.
    tau = np.zeros(n)
    for j in range(n):
        for (_, i, _), (p, f) in zip(model.point_masses(), forces):
            if i >= j:
                r = p - joints[j]
                tau[j] += r[0] * f[1] - r[1] * f[0]
    f = np.asarray(f_tip, dtype=float)
    return tau + tip_jacobian(model, q).T @ f


# ---------------------------------------------------------------------------
# 5-DoF spatial kinematics for impedance control


def _rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def _rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _arm_frames(model: ArmModel, q: Sequence[float]):
    """Joint origins and axes for the 5-DoF arm; q follows ARM_JOINTS order.

    Pitch joints rotate about the body -y axis so that positive pitch lifts
    the arm from the horizontal +x direction; yaw rotates about +z and roll
    about the (distal) link axis.
    """
    if len(q) != 5:
        raise ValueError("arm configuration must have 5 joints")
    yaw, sp, ep, wp, roll = q
    axes = []
    origins = []
    R = np.eye(3)
    p = np.zeros(3)
    # Shoulder yaw about vertical.
    axes.append(R @ np.array([0.0, 0.0, 1.0]))
    origins.append(p.copy())
    R = R @ _rot_z(yaw)
    # Pitch chain along the links.
    lengths = [link.length_m for link in model.links]
    for axis_angle, length in zip((sp, ep, wp), lengths):
        axes.append(R @ np.array([0.0, -1.0, 0.0]))
        origins.append(p.copy())
        R = R @ _rot_y(-axis_angle)
        p = p + R @ np.array([length, 0.0, 0.0])
    # Wrist roll about the final link axis; tip position unaffected.
    axes.append(R @ np.array([1.0, 0.0, 0.0]))
    origins.append(p.copy())
    R = R @ _rot_x(roll)
    return origins, axes, p, R


def forward_kinematics(model: ArmModel, q: Sequence[float]):
    """Tip position (3,) and rotation (3, 3) for the 5-DoF arm."""
    _, _, p, R = _arm_frames(model, q)
    return p, R


def arm_jacobian(model: ArmModel, q: Sequence[float]) -> np.ndarray:
    """3 x 5 positional Jacobian of the tip."""
    origins, axes, tip, _ = _arm_frames(model, q)
    J = np.zeros((3, 5))
    for j in range(5):
        J[:, j] = np.cross(axes[j], tip - origins[j])
    return J


def arm_gravity(model: ArmModel, q: Sequence[float]) -> np.ndarray:
    """Gravity torques for the 5-DoF arm.

    Potential energy depends only on the pitch angles (yaw and roll axes
    are vertical / along the link), so the planar pitch-chain gravity
    vector embeds at the pitch coordinates.
    """
    g3 = gravity_vector(model, [q[1], q[2], q[3]])
    out = np.zeros(5)
    out[1:4] = g3
    return out


def impedance_torque(
    model: ArmModel, state: JointState, target: CartesianTarget
) -> np.ndarray:
    """Gravity compensation plus J^T (K (x_d - x) + D (xd_d - xd) + f_tip)."""
    q = np.asarray(state.q, dtype=float)
    qd = np.asarray(state.qd, dtype=float)
    x, _ = forward_kinematics(model, q)
    J = arm_jacobian(model, q)
    xd = J @ qd
    K = np.asarray(target.stiffness, dtype=float)
    D = np.asarray(target.damping, dtype=float)
    wrench = (
        K @ (np.asarray(target.x_d) - x)
        + D @ (np.asarray(target.xd_d) - xd)
        + np.asarray(target.f_tip)
    )
    return arm_gravity(model, q) + J.T @ wrench


# ---------------------------------------------------------------------------
# Static analysis and payload estimation


def static_worstcase_torques(
    model: ArmModel, payload_kg: float = 0.0, safety_factor: float = 1.0
) -> dict[str, float]:
    """Gravity moments at full horizontal extension, times a safety factor."""
    if payload_kg < 0:
        raise ValueError("payload must be nonnegative")
    if safety_factor < 1:
        raise ValueError("safety factor must be at least 1")
    q = np.zeros(len(model.links))
    tau = gravity_vector(model, q)
    J = tip_jacobian(model, q)
    tau = tau + J.T @ np.array([0.0, payload_kg * model.gravity, 0.0])
    return {
        name: safety_factor * float(t) for name, t in zip(PITCH_JOINTS, tau)
    }


@dataclass(frozen=True)
class PayloadEstimate:
    payload_kg: float
    residual_nm: float
    observable: bool
    anomaly: bool


def estimate_payload(
    model: ArmModel,
    q: Sequence[float],
    tau_measured: Sequence[float],
    anomaly_threshold_nm: float = 1.0,
) -> PayloadEstimate:
    """Least-squares point mass at the tip explaining the static torques.

    The regressor is the torque produced per kilogram of tip mass; a large
    residual after the fit flags an anomaly (e.g. a failed grasp or an
    unexpected contact).  Near-vertical poses make the regressor vanish and
    the payload unobservable.
    """
    q = np.asarray(q, dtype=float)
    tau = np.asarray(tau_measured, dtype=float)
    J = tip_jacobian(model, q)
    regressor = J.T @ np.array([0.0, model.gravity, 0.0])
    norm = float(np.linalg.norm(regressor))
    excess = tau - gravity_vector(model, q)
    if norm < 1e-6 * model.gravity * model.reach_m:
        return PayloadEstimate(0.0, float(np.linalg.norm(excess)), False, False)
    payload = float(regressor @ excess) / (norm * norm)
    residual = float(np.linalg.norm(excess - payload * regressor))
    return PayloadEstimate(
        payload_kg=payload,
        residual_nm=residual,
        observable=True,
        anomaly=residual > anomaly_threshold_nm,
    )


def joint_limit_violations(
    model: ArmModel, q_rad: Sequence[float], joints: Sequence[str] = PITCH_JOINTS
) -> list[str]:
    """Names of joints whose angle falls outside the allowed range."""
    out = []
    for angle, name in zip(q_rad, joints):
        lo, hi = model.joint_limits_deg[name]
        deg = np.degrees(angle)
        if not (lo - 1e-9 <= deg <= hi + 1e-9):
            out.append(f"{name}: {deg:.2f} deg outside [{lo}, {hi}]")
    return out
