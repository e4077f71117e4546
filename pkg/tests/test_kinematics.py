"""Forward kinematics, Jacobian, and IK solver checks."""
from __future__ import annotations

import numpy as np

from grasprl import kinematics as kin
from grasprl.env import ArmModel

ARM = ArmModel()


def test_straight_up_at_zero_angles():
    pts = kin.joint_positions(np.zeros(6), ARM.link_lengths, ARM.base_position)
    assert np.allclose(pts[:, :2], 0.0)
    assert np.isclose(pts[6, 2], ARM.link_lengths.sum())


def test_yaw_rotates_chain_about_z():
    q = np.array([0.0, 0.7, 0.3, 0.2, 0.1, 0.4])
    p0 = kin.hand_position(q, ARM.link_lengths, ARM.base_position)
    yaw = 1.1
    q_rot = q.copy()
    q_rot[0] = yaw
    p1 = kin.hand_position(q_rot, ARM.link_lengths, ARM.base_position)
    rot = np.array([[np.cos(yaw), -np.sin(yaw), 0],
                    [np.sin(yaw), np.cos(yaw), 0],
                    [0, 0, 1]])
    assert np.allclose(p1, rot @ p0, atol=1e-12)


def test_hand_normal_is_unit_and_in_plane():
    rng = np.random.default_rng(0)
    for _ in range(50):
        q = rng.uniform(-1, 1, 6)
        wrist = rng.uniform(-np.pi, np.pi)
        n = kin.hand_normal(q, wrist)
        assert np.isclose(np.linalg.norm(n), 1.0, atol=1e-9)
        # the normal lies in the vertical plane set by the yaw
        plane_normal = np.array([-np.sin(q[0]), np.cos(q[0]), 0.0])
        assert abs(np.dot(n, plane_normal)) < 1e-9


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(10):
        q = rng.uniform(-1.2, 1.2, 6)
        jac = kin.position_jacobian(q, ARM.link_lengths, ARM.base_position)
        h = 1e-6
        for j in range(6):
            dq = np.zeros(6)
            dq[j] = h
            p_plus = kin.hand_position(q + dq, ARM.link_lengths,
                                       ARM.base_position)
            p_minus = kin.hand_position(q - dq, ARM.link_lengths,
                                        ARM.base_position)
            numeric = (p_plus - p_minus) / (2 * h)
            assert np.allclose(jac[:, j], numeric, atol=1e-7)


def test_ik_reaches_reachable_targets():
    rng = np.random.default_rng(2)
    q0 = np.array([0.0, 0.5, 0.5, 0.4, 0.3, 0.2])
    for _ in range(25):
        target = np.array([rng.uniform(0.35, 0.65), rng.uniform(-0.25, 0.25),
                           rng.uniform(0.05, 0.45)])
        q, residual, converged = kin.solve_ik(
            q0, target, ARM.link_lengths, ARM.base_position, ARM.joint_limits)
        assert converged, f"IK failed for {target}, residual {residual}"
        assert residual < 1e-3
        assert np.all(q >= ARM.joint_limits[:, 0] - 1e-12)
        assert np.all(q <= ARM.joint_limits[:, 1] + 1e-12)


def test_ik_reports_failure_for_unreachable_target():
    q0 = np.zeros(6)
    target = np.array([5.0, 0.0, 0.0])
    _, residual, converged = kin.solve_ik(
        q0, target, ARM.link_lengths, ARM.base_position, ARM.joint_limits,
        max_iters=50)
    assert not converged
    assert residual > 1.0


def test_boxed_step_respects_cap():
    rng = np.random.default_rng(3)
    q = np.array([0.1, 0.6, 0.6, 0.3, 0.2, 0.1])
    for _ in range(10):
        target = kin.hand_position(q, ARM.link_lengths, ARM.base_position) \
            + rng.uniform(-0.1, 0.1, 3)
        for cap in (0.01, 0.049):
            dq = kin.boxed_step(q, target, ARM.link_lengths, ARM.base_position,
                                ARM.joint_limits, cap)
            assert np.all(np.abs(dq) <= cap + 1e-12)


def test_boxed_step_beats_clamped_dls_on_long_steps():
    # the boxed solve must close more distance than naive clamping when the
    # min-norm step exceeds the per-joint cap
    q = np.array([0.0, 0.9, 0.9, 0.4, 0.2, 0.1])
    hand = kin.hand_position(q, ARM.link_lengths, ARM.base_position)
    target = hand + np.array([0.0, 0.0, -0.05])
    cap = 0.045
    dq_naive = np.clip(kin.dls_step(q, target, ARM.link_lengths,
                                    ARM.base_position), -cap, cap)
    dq_boxed = kin.boxed_step(q, target, ARM.link_lengths, ARM.base_position,
                              ARM.joint_limits, cap)
    dist = lambda dq: np.linalg.norm(target - kin.hand_position(
        np.clip(q + dq, ARM.joint_limits[:, 0], ARM.joint_limits[:, 1]),
        ARM.link_lengths, ARM.base_position))
    assert dist(dq_boxed) <= dist(dq_naive) + 1e-9


def test_chain_sample_points_cover_links():
    q = np.array([0.2, 0.5, 0.4, 0.3, 0.2, 0.1])
    pts = kin.chain_sample_points(q, ARM.link_lengths, ARM.base_position,
                                  per_link=3)
    # 7 joints + 3 interior points per link
    assert pts.shape == (7 + 6 * 3, 3)
    joints = kin.joint_positions(q, ARM.link_lengths, ARM.base_position)
    assert np.allclose(pts[:7], joints)
