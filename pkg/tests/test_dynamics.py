import numpy as np
import pytest

from kitchencell.dynamics import (
    ArmModel,
    CartesianTarget,
    JointState,
    Link,
    PITCH_JOINTS,
    arm_gravity,
    arm_jacobian,
    coriolis_matrix,
    estimate_payload,
    forward_kinematics,
    gravity_vector,
    impedance_torque,
    inverse_dynamics,
    inverse_dynamics_newton_euler,
    joint_limit_violations,
    mass_matrix,
    potential_energy,
    static_worstcase_torques,
    tip_jacobian,
)

MODEL = ArmModel()
RNG = np.random.default_rng(42)


def random_states(n, scale_q=np.pi, scale_qd=2.0, scale_qdd=4.0):
    for _ in range(n):
        yield JointState(
            q=tuple(RNG.uniform(-scale_q, scale_q, 3)),
            qd=tuple(RNG.uniform(-scale_qd, scale_qd, 3)),
            qdd=tuple(RNG.uniform(-scale_qdd, scale_qdd, 3)),
        )


def test_link_validation():
    with pytest.raises(ValueError):
        Link("bad", -1.0, 0.1)
    with pytest.raises(ValueError):
        Link("bad", 1.0, 0.1, com_fraction=1.5)


def test_mass_matrix_is_spd():
    for state in random_states(50):
        M = mass_matrix(MODEL, state.q)
        assert np.allclose(M, M.T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(M)) > 0


def test_gravity_matches_potential_gradient():
    eps = 1e-6
    for state in random_states(20):
        q = np.asarray(state.q)
        g = gravity_vector(MODEL, q)
        for k in range(3):
            dq = np.zeros(3)
            dq[k] = eps
            fd = (
                potential_energy(MODEL, q + dq)
                - potential_energy(MODEL, q - dq)
            ) / (2 * eps)
            assert g[k] == pytest.approx(fd, abs=1e-5)


def test_lagrangian_and_newton_euler_agree():
    for state in random_states(50):
        tau_l = inverse_dynamics(MODEL, state)
        tau_ne = inverse_dynamics_newton_euler(MODEL, state)
        assert np.max(np.abs(tau_l - tau_ne)) < 1e-9


def test_static_pose_torque_equals_gravity():
    state = JointState(q=(0.3, -0.7, 0.2))
    tau = inverse_dynamics(MODEL, state)
    assert np.allclose(tau, gravity_vector(MODEL, state.q), atol=1e-12)


def test_coriolis_skew_symmetry_property():
    # Mdot - 2C must be skew symmetric for the Christoffel convention.
    eps = 1e-6
    for state in random_states(20):
        q = np.asarray(state.q)
        qd = np.asarray(state.qd)
        C = coriolis_matrix(MODEL, q, qd)
        Mdot = (
            mass_matrix(MODEL, q + eps * qd) - mass_matrix(MODEL, q - eps * qd)
        ) / (2 * eps)
        S = Mdot - 2 * C
        assert np.max(np.abs(S + S.T)) < 1e-5


def test_tip_wrench_maps_through_jacobian():
    state = JointState(q=(0.1, 0.4, -0.2))
    f = (1.5, -2.0, 0.3)
    tau = inverse_dynamics(MODEL, state, f_tip=f)
    expected = gravity_vector(MODEL, state.q) + tip_jacobian(
        MODEL, state.q
    ).T @ np.array(f)
    assert np.allclose(tau, expected, atol=1e-12)


def test_forward_kinematics_reach_and_zero_pose():
    p, R = forward_kinematics(MODEL, [0.0] * 5)
    assert p == pytest.approx([MODEL.reach_m, 0.0, 0.0], abs=1e-12)
    assert np.allclose(R, np.eye(3), atol=1e-12)
    # yaw rotates the whole chain about z
    p2, _ = forward_kinematics(MODEL, [np.pi / 2, 0, 0, 0, 0])
    assert p2 == pytest.approx([0.0, MODEL.reach_m, 0.0], abs=1e-9)


def test_arm_jacobian_matches_finite_differences():
    q = np.array([0.3, 0.5, -0.4, 0.2, 0.7])
    J = arm_jacobian(MODEL, q)
    eps = 1e-7
    for j in range(5):
        dq = np.zeros(5)
        dq[j] = eps
        p_plus, _ = forward_kinematics(MODEL, q + dq)
        p_minus, _ = forward_kinematics(MODEL, q - dq)
        assert np.allclose(J[:, j], (p_plus - p_minus) / (2 * eps), atol=1e-6)


def test_arm_gravity_embeds_pitch_chain():
    q = [0.4, 0.3, -0.6, 0.2, 1.1]
    g = arm_gravity(MODEL, q)
    assert g[0] == 0.0 and g[4] == 0.0
    assert np.allclose(g[1:4], gravity_vector(MODEL, q[1:4]), atol=1e-12)


def test_impedance_torque_balances_at_target():
    q = np.array([0.2, 0.5, -0.3, 0.1, 0.0])
    x, _ = forward_kinematics(MODEL, q)
    target = CartesianTarget(x_d=tuple(x))
    tau = impedance_torque(MODEL, JointState(q=tuple(q), qd=(0.0,) * 5), target)
    assert np.allclose(tau, arm_gravity(MODEL, q), atol=1e-10)
    # displacing the target pulls the tip toward it
    target2 = CartesianTarget(x_d=tuple(x + np.array([0.0, 0.0, 0.1])))
    tau2 = impedance_torque(MODEL, JointState(q=tuple(q), qd=(0.0,) * 5), target2)
    J = arm_jacobian(MODEL, q)
    force = np.linalg.pinv(J.T) @ (tau2 - arm_gravity(MODEL, q))
    assert force[2] > 0


def test_cartesian_target_validates_gains():
    with pytest.raises(ValueError):
        CartesianTarget(x_d=(0, 0, 0), stiffness=-np.eye(3))
    with pytest.raises(ValueError):
        CartesianTarget(x_d=(0, 0, 0), damping=-np.eye(3))


def test_static_worstcase_torques_monotone_in_reach():
    full = static_worstcase_torques(MODEL)
    assert (
        full["shoulder_pitch"] > full["elbow_pitch"] > full["wrist_pitch"] > 0
    )
    loaded = static_worstcase_torques(MODEL, payload_kg=3.0, safety_factor=1.5)
    for name in PITCH_JOINTS:
        assert loaded[name] > full[name]


def test_rated_payload_within_peak_torques():
    tau = static_worstcase_torques(MODEL, payload_kg=5.0)
    for name in PITCH_JOINTS:
        assert tau[name] <= MODEL.torque_ratings[name][1]


def test_payload_estimate_recovers_tip_mass():
    q = (0.3, -0.5, 0.4)
    true_mass = 1.7
    tau = gravity_vector(MODEL, q) + tip_jacobian(MODEL, q).T @ np.array(
        [0.0, true_mass * MODEL.gravity, 0.0]
    )
    est = estimate_payload(MODEL, q, tau)
    assert est.observable and not est.anomaly
    assert est.payload_kg == pytest.approx(true_mass, abs=1e-9)


def test_payload_estimate_flags_anomalous_wrench():
    q = (0.3, -0.5, 0.4)
    tau = gravity_vector(MODEL, q) + tip_jacobian(MODEL, q).T @ np.array(
        [40.0, 2.0, 0.0]
    )
    est = estimate_payload(MODEL, q, tau)
    assert est.anomaly


def test_payload_unobservable_at_vertical_pose():
    q = (np.pi / 2, 0.0, 0.0)  # arm pointing straight up
    tau = gravity_vector(MODEL, q)
    est = estimate_payload(MODEL, q, tau)
    assert not est.observable


def test_joint_limit_violations_report_ranges():
    assert joint_limit_violations(MODEL, (0.0, 0.0, 0.0)) == []
    bad = joint_limit_violations(MODEL, (0.0, np.radians(100.0), 0.0))
    assert len(bad) == 1 and bad[0].startswith("elbow_pitch")
