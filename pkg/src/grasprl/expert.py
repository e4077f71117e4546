"""Scripted grasping expert: a damped-least-squares servo toward the grasp
pose, driven entirely from the 20-element observation so the same policy can
run inside the simulator or behind the teleoperation protocol.

The expert hovers above the object outside the contact shell, aligns the hand
normal and aperture, then closes the final gap in a single committed step so
the episode never passes through the contact-penalty region.
"""
from __future__ import annotations

import numpy as np

from . import kinematics as kin
from .demos import DemoFormatError, Trajectory, TrajStep
from .env import (ACT_APERTURE, ACT_DIM, ACT_WRIST, GraspEnv, OBS_APERTURE,
                  OBS_DIST, OBS_HAND, OBS_NORMAL, OBS_OBJECT, OBS_Q,
                  SceneConfig, TASKS)


class ExpertFailure(RuntimeError):
    """The expert could not produce a successful episode within its retry budget."""


class ScriptedExpert:
    """Closed-loop grasping controller over raw observations."""

    def __init__(
        self,
        task: str,
        scene: SceneConfig | None = None,
        noise_scale: float = 0.0,
        rng: np.random.Generator | None = None,
        approach_speed: float = 0.35,
        wrist_speed: float = 0.5,
        hover_height: float = 0.045,
        align_cos: float = 0.85,
        aperture_tol: float = 0.05,
    ):
        if not 0.0 <= noise_scale <= 0.2:
            raise ValueError(f"noise_scale must be in [0, 0.2], got {noise_scale}")
        self.task = TASKS[task]
        self.scene = scene or SceneConfig()
        self.noise_scale = noise_scale
        self.rng = rng or np.random.default_rng(0)
        self.approach_speed = approach_speed
        self.wrist_speed = wrist_speed
        self.hover_height = hover_height
        self.align_cos = align_cos
        self.aperture_tol = aperture_tol
        # once aligned, the hover target descends toward the contact shell
        # until the dive fits the per-step actuation box
        self.hover_floor = self.scene.contact_dist_slack + 0.008

    def _wrist_units(self, q: np.ndarray, n_hand: np.ndarray,
                     target_dir: np.ndarray) -> float:
        """Wrist delta (in action units) steering the normal toward target_dir."""
        yaw = q[0]
        heading = np.array([np.cos(yaw), np.sin(yaw), 0.0])
        th_now = np.arctan2(np.dot(n_hand, heading), n_hand[2])
        th_des = np.arctan2(np.dot(target_dir, heading), target_dir[2])
        delta = (th_des - th_now + np.pi) % (2.0 * np.pi) - np.pi
        return float(np.clip(delta / self.scene.wrist_scale,
                             -self.wrist_speed, self.wrist_speed))

    def _dive_units(self, q: np.ndarray, n_hand: np.ndarray, obj: np.ndarray,
                    wrist_units: float) -> np.ndarray | None:
        """Joint units for a one-step plunge into the success shell, or None
        if no box-feasible step lands there.

        The dive must cross the contact shell in a single step, so it gets
        nearly full actuator authority. Aim candidates go from a laterally
        tight descent onto the grasp point to a free plunge at the object
        center; the first candidate predicted to land inside the success shell
        with the post-dive normal still aligned wins."""
        sc = self.scene
        arm = sc.arm
        cap = 0.98 * sc.dq_scale
        grasp = obj + np.array([0.0, 0.0,
                                self.task.object_radius + sc.grip_offset])
        # commit only when the landing sits inside the ball with margin:
        # imitators reproduce the dive with a shrunken, laterally smeared
        # step, and the landing margin is what absorbs that
        max_landing = self.task.object_radius + sc.success_dist_slack - 0.008
        min_cos = sc.reward.lambda_th + 0.03
        # aim for the grasp point above the object first: mid-ball landings
        # keep the alignment cosine well-conditioned; plunge at the center
        # only when no vertical descent fits the box
        for target, lateral_weight in ((grasp, 1.0), (grasp, 2.0), (obj, 2.0)):
            dq = kin.boxed_step(q, target, arm.link_lengths, arm.base_position,
                                arm.joint_limits, cap,
                                lateral_weight=lateral_weight)
            q_next = np.clip(q + dq, arm.joint_limits[:, 0],
                             arm.joint_limits[:, 1])
            hand_next = kin.hand_position(q_next, arm.link_lengths,
                                          arm.base_position)
            landing = float(np.linalg.norm(obj - hand_next))
            if landing > max_landing:
                continue
            # post-dive normal: current pitch angle shifted by the commanded
            # joint and wrist deltas, in the post-dive arm plane
            yaw = q[0]
            heading = np.array([np.cos(yaw), np.sin(yaw), 0.0])
            th_now = np.arctan2(np.dot(n_hand, heading), n_hand[2])
            th_next = th_now + float(np.sum(dq[1:])) + wrist_units * sc.wrist_scale
            yaw_next = q_next[0]
            heading_next = np.array([np.cos(yaw_next), np.sin(yaw_next), 0.0])
            n_next = np.sin(th_next) * heading_next + np.cos(th_next) * kin.EZ
            rel = obj - hand_next
            cos_landing = float(np.dot(n_next, rel) / max(np.linalg.norm(rel),
                                                          1e-12))
            if cos_landing >= min_cos:
                return dq / sc.dq_scale
        return None

    def action(self, obs: np.ndarray) -> np.ndarray:
        """Pure function of the observation (plus noise): statefulness would
        make the expert unlearnable for behavior cloning."""
        sc = self.scene
        arm = sc.arm
        q = obs[OBS_Q]
        hand = obs[OBS_HAND]
        n_hand = obs[OBS_NORMAL]
        obj = obs[OBS_OBJECT]
        aperture = obs[OBS_APERTURE]
        dist = obs[OBS_DIST]
        radius = self.task.object_radius

        aperture_ok = abs(aperture - self.task.grasp_aperture) <= self.aperture_tol
        aligned = -n_hand[2] >= self.align_cos
        wrist_units = self._wrist_units(q, n_hand, obj - hand)

        units = None
        cap = 0.98
        if aligned and aperture_ok and dist <= radius + self.hover_height + 0.03:
            units = self._dive_units(q, n_hand, obj, wrist_units)

        if units is None:
            cap = self.approach_speed
            settled = aligned and aperture_ok
            if settled:
                # sink at a constant rate toward the shell so the dive-commit
                # boundary is crossed decisively, not asymptotically
                floor_z = obj[2] + radius + self.hover_floor
                target = np.array([obj[0], obj[1],
                                   max(hand[2] - 0.009, floor_z)])
            else:
                target = obj + np.array([0.0, 0.0, radius + self.hover_height])
            dq = kin.dls_step(q, target, arm.link_lengths, arm.base_position,
                              damping=0.05)
            units = dq / sc.dq_scale
            # uniform scaling preserves the servo direction at constant speed
            biggest = float(np.max(np.abs(units)))
            if biggest > cap:
                units = units * (cap / biggest)
            # keep the approach outside the contact shell
            standoff = radius + sc.contact_dist_slack + 0.005
            for _ in range(6):
                q_next = np.clip(q + units * sc.dq_scale,
                                 arm.joint_limits[:, 0], arm.joint_limits[:, 1])
                hand_next = kin.hand_position(q_next, arm.link_lengths,
                                              arm.base_position)
                if np.linalg.norm(obj - hand_next) >= standoff:
                    break
                units = units * 0.5

        action = np.zeros(ACT_DIM)
        action[:6] = np.clip(units, -cap, cap)
        action[ACT_WRIST] = wrist_units
        action[ACT_APERTURE] = float(np.clip(
            (self.task.grasp_aperture - aperture) / sc.aperture_scale,
            -self.wrist_speed, self.wrist_speed))
        if self.noise_scale > 0:
            action = action + self.rng.uniform(
                -self.noise_scale, self.noise_scale, ACT_DIM)
        return np.clip(action, -1.0, 1.0)


def run_expert_episode(
    env: GraspEnv,
    env_seed: int,
    noise_scale: float,
    noise_rng: np.random.Generator,
) -> Trajectory:
    """Roll one expert episode; the trajectory ends on the first event or at
    the step cap, whichever comes first."""
    expert = ScriptedExpert(env.task.name, env.scene, noise_scale, noise_rng)
    _, obs = env.reset(env_seed)
    steps: list[TrajStep] = []
    done = False
    while not done:
        action = expert.action(obs)
        state, next_obs, breakdown, done = env.step(action)
        steps.append(TrajStep(obs=obs.copy(), action=action.copy(),
                              reward=breakdown.total,
                              event=state.terminal_event or "none", done=done))
        obs = next_obs
    return Trajectory(task=env.task.name, seed=env_seed, steps=steps,
                      source="scripted")


def scripted_expert(
    env_seed: int,
    task: str,
    noise_scale: float = 0.0,
    scene: SceneConfig | None = None,
    max_retries: int = 10,
) -> Trajectory:
    """Produce one successful expert trajectory for the seeded scene.

    Failed attempts are discarded and regenerated with a fresh noise stream;
    after ``max_retries`` failures the scene is considered hopeless.
    """
    env = GraspEnv(task, scene)
    for attempt in range(max_retries):
        noise_rng = np.random.default_rng([env_seed, attempt])
        traj = run_expert_episode(env, env_seed, noise_scale, noise_rng)
        if traj.succeeded:
            return traj
    raise ExpertFailure(
        f"expert failed to grasp on seed {env_seed} ({task}) "
        f"after {max_retries} attempts")


def stratified_scene_seeds(
    n: int,
    task: str,
    scene: SceneConfig | None = None,
    base_seed: int = 0,
) -> list[int]:
    """Scene seeds whose object placements tile the workspace box.

    A demonstrator naturally spreads examples over the workspace; random
    seeds instead leave coverage holes that an imitator cannot interpolate
    across. Scans seeds from ``base_seed`` and keeps the first hit in each
    cell of a coarse grid (columns x rows close to n), topping up with the
    earliest unused seeds if the scan budget runs out.
    """
    scene = scene or SceneConfig()
    env = GraspEnv(task, scene)
    cols = max(1, int(np.ceil(np.sqrt(n * 5 / 3.0))))
    rows = max(1, int(np.ceil(n / cols)))
    box = scene.object_box
    chosen: dict[tuple[int, int], int] = {}
    scanned: list[int] = []
    for seed in range(base_seed, base_seed + 60 * n):
        state, _ = env.reset(seed)
        scanned.append(seed)
        u = (state.nu_object[0] - box[0, 0]) / (box[0, 1] - box[0, 0])
        v = (state.nu_object[1] - box[1, 0]) / (box[1, 1] - box[1, 0])
        cell = (min(int(u * cols), cols - 1), min(int(v * rows), rows - 1))
        if cell not in chosen:
            chosen[cell] = seed
            if len(chosen) == n:
                break
    seeds = sorted(chosen.values())
    for seed in scanned:
        if len(seeds) >= n:
            break
        if seed not in seeds:
            seeds.append(seed)
    return seeds[:n]


def collect_demos(
    n: int,
    task: str,
    noise_scale: float = 0.05,
    seed: int = 0,
    scene: SceneConfig | None = None,
    stratify: bool = True,
) -> list[Trajectory]:
    """Collect ``n`` successful demonstrations.

    Scenes are stratified over the workspace box by default; pass
    ``stratify=False`` for plain consecutive seeds.
    """
    if n < 0:
        raise DemoFormatError("demo count must be non-negative")
    if stratify:
        seeds = stratified_scene_seeds(n, task, scene, base_seed=seed)
    else:
        seeds = [seed + i for i in range(n)]
    return [scripted_expert(s, task, noise_scale, scene) for s in seeds]
