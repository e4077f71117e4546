"""Serial-chain kinematics: a yaw base joint followed by five pitch joints.

The whole chain lives in the vertical plane selected by the base yaw, which
keeps forward kinematics and the position Jacobian fully analytic:

    heading  h = (cos q0, sin q0, 0)
    link i>=1 direction = sin(c_i) * h + cos(c_i) * e_z,  c_i = q1 + ... + qi
    link 0 is a fixed vertical column.

The hand normal is the last link direction pitched further by the wrist angle.
"""
from __future__ import annotations

import numpy as np

EZ = np.array([0.0, 0.0, 1.0])


def joint_positions(q: np.ndarray, link_lengths: np.ndarray,
                    base: np.ndarray) -> np.ndarray:
    """Positions of the 7 chain points (base joint through hand center)."""
    yaw = q[0]
    h = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    pts = np.empty((7, 3))
    pts[0] = base
    pts[1] = pts[0] + link_lengths[0] * EZ
    c = 0.0
    for i in range(1, 6):
        c += q[i]
        d = np.sin(c) * h + np.cos(c) * EZ
        pts[i + 1] = pts[i] + link_lengths[i] * d
    return pts


def hand_position(q: np.ndarray, link_lengths: np.ndarray,
                  base: np.ndarray) -> np.ndarray:
    return joint_positions(q, link_lengths, base)[6]


def hand_normal(q: np.ndarray, wrist_pitch: float) -> np.ndarray:
    """Unit normal: last-link pitch plus the wrist angle, in the arm plane."""
    yaw = q[0]
    h = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    c = float(np.sum(q[1:6])) + wrist_pitch
    n = np.sin(c) * h + np.cos(c) * EZ
    return n / np.linalg.norm(n)


def position_jacobian(q: np.ndarray, link_lengths: np.ndarray,
                      base: np.ndarray) -> np.ndarray:
    """3x6 Jacobian of the hand position with respect to the joint angles."""
    pts = joint_positions(q, link_lengths, base)
    hand = pts[6]
    yaw = q[0]
    axis = np.array([-np.sin(yaw), np.cos(yaw), 0.0])  # pitch axis of the plane
    jac = np.empty((3, 6))
    jac[:, 0] = np.cross(EZ, hand - pts[0])
    for j in range(1, 6):
        jac[:, j] = np.cross(axis, hand - pts[j])
    return jac


def dls_step(q: np.ndarray, target: np.ndarray, link_lengths: np.ndarray,
             base: np.ndarray, damping: float = 0.1) -> np.ndarray:
    """One damped-least-squares step toward ``target``: dq = J^T (JJ^T + l^2 I)^-1 e."""
    err = target - hand_position(q, link_lengths, base)
    jac = position_jacobian(q, link_lengths, base)
    a = jac @ jac.T + damping * damping * np.eye(3)
    return jac.T @ np.linalg.solve(a, err)


def solve_ik(
    q0: np.ndarray,
    target: np.ndarray,
    link_lengths: np.ndarray,
    base: np.ndarray,
    joint_limits: np.ndarray,
    max_iters: int = 200,
    tol: float = 1e-4,
    damping: float = 0.1,
    max_step: float = 0.2,
) -> tuple[np.ndarray, float, bool]:
    """Iterate DLS with joint-limit clamping.

    Returns (q, residual, converged). ``converged`` means the hand landed
    within ``tol`` meters of the target.
    """
    q = q0.astype(np.float64).copy()
    lo, hi = joint_limits[:, 0], joint_limits[:, 1]
    for _ in range(max_iters):
        dq = dls_step(q, target, link_lengths, base, damping)
        biggest = np.max(np.abs(dq))
        if biggest > max_step:
            dq *= max_step / biggest
        q = np.clip(q + dq, lo, hi)
        residual = float(np.linalg.norm(target - hand_position(q, link_lengths, base)))
        if residual < tol:
            return q, residual, True
    residual = float(np.linalg.norm(target - hand_position(q, link_lengths, base)))
    return q, residual, False


def boxed_step(
    q: np.ndarray,
    target: np.ndarray,
    link_lengths: np.ndarray,
    base: np.ndarray,
    joint_limits: np.ndarray,
    cap: float,
    iters: int = 4,
    lateral_weight: float = 1.0,
) -> np.ndarray:
    """Best single-step joint delta toward ``target`` with each component
    bounded by ``cap``.

    Gauss-Newton with an exact box-constrained least-squares subproblem, so
    saturated joints shed their share of the motion onto joints with headroom.
    ``lateral_weight`` > 1 penalizes x/y residual harder than z, trading
    descent depth for staying on the vertical through the target.
    """
    from scipy.optimize import lsq_linear

    lo, hi = joint_limits[:, 0], joint_limits[:, 1]
    w = np.array([lateral_weight, lateral_weight, 1.0])
    dq = np.zeros_like(q)
    for _ in range(iters):
        q_try = np.clip(q + dq, lo, hi)
        err = target - hand_position(q_try, link_lengths, base)
        jac = position_jacobian(q_try, link_lengths, base)
        sub = lsq_linear(w[:, None] * jac, w * err, bounds=(-cap - dq, cap - dq))
        dq = dq + sub.x
    return np.clip(dq, -cap, cap)


def chain_sample_points(q: np.ndarray, link_lengths: np.ndarray,
                        base: np.ndarray, per_link: int = 3) -> np.ndarray:
    """Points along every link (joints plus interior samples), for collision tests."""
    pts = joint_positions(q, link_lengths, base)
    fractions = np.linspace(0.0, 1.0, per_link + 2)[1:-1]
    samples = [pts]
    for i in range(6):
        seg = pts[i + 1] - pts[i]
        samples.append(pts[i] + fractions[:, None] * seg[None, :])
    return np.vstack(samples)
