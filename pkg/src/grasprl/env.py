"""Kinematic arm-hand grasping simulator.

A 6-joint serial arm with a wrist pitch and a gripper aperture chases a ball
or bottle placed on the table plane z = 0. Each step pays a shaped reward:

    r = -|s - s_T|^2  +  xi1 * r_smooth  +  xi2 * r_event  +  xi3 * r_pose

where s is the 20-element observation, s_T the target observation built by an
inverse-kinematics solve at reset, r_smooth the one-step drop in squared
distance to s_T, r_event the success/collision/contact payout, and r_pose a
piecewise-linear score of the hand-normal alignment cos(psi).

Episodes end on the first success, collision, or contact event, or after 100
steps. Everything is deterministic given (seed, action sequence).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from . import kinematics as kin

log = logging.getLogger(__name__)

OBS_DIM = 20
ACT_DIM = 8

# observation layout
OBS_Q = slice(0, 6)
OBS_HAND = slice(6, 9)
OBS_NORMAL = slice(9, 12)
OBS_OBJECT = slice(12, 15)
OBS_REL = slice(15, 18)
OBS_APERTURE = 18
OBS_DIST = 19

# action layout: joint deltas, wrist delta, aperture delta
ACT_JOINTS = slice(0, 6)
ACT_WRIST = 6
ACT_APERTURE = 7

SUCCESS = "success"
COLLISION = "collision"
CONTACT = "contact"
NO_EVENT = "none"

MAX_STEPS = 100


class EpisodeDoneError(RuntimeError):
    """step() was called on a finished episode."""


class DegenerateActionError(ValueError):
    """Action contained NaN or infinity; refusing to clamp it silently."""


@dataclass
class ArmModel:
    link_lengths: np.ndarray = field(
        default_factory=lambda: np.array([0.30, 0.25, 0.20, 0.15, 0.10, 0.08]))
    joint_limits: np.ndarray = field(
        default_factory=lambda: np.pi * np.array(
            [[-1, 1], [-0.75, 0.75], [-0.75, 0.75], [-1, 1], [-1, 1], [-1, 1]],
            dtype=np.float64))
    base_position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.link_lengths = np.asarray(self.link_lengths, dtype=np.float64)
        self.joint_limits = np.asarray(self.joint_limits, dtype=np.float64)
        self.base_position = np.asarray(self.base_position, dtype=np.float64)
        if np.any(self.link_lengths <= 0):
            raise ValueError("link lengths must be positive")
        if np.any(self.joint_limits[:, 0] >= self.joint_limits[:, 1]):
            raise ValueError("joint limits must satisfy lo < hi")

    @property
    def reach(self) -> float:
        return float(np.sum(self.link_lengths))


@dataclass
class TaskSpec:
    name: str
    object_radius: float
    object_z: float
    aperture_band: tuple[float, float]
    grasp_aperture: float


TASKS = {
    "ball": TaskSpec("ball", object_radius=0.035, object_z=0.035,
                     aperture_band=(0.25, 0.55), grasp_aperture=0.40),
    "bottle": TaskSpec("bottle", object_radius=0.030, object_z=0.10,
                       aperture_band=(0.35, 0.65), grasp_aperture=0.50),
}


@dataclass
class RewardWeights:
    xi1: float = 1000.0   # motion smoothness
    xi2: float = 1.0      # event payout
    xi3: float = 1.0      # pose alignment
    z1: float = 1000.0    # success
    z2: float = 100.0     # collision
    z3: float = 60.0      # contact without success
    z4: float = 7.0       # pose slope below threshold
    z5: float = 80.0      # pose slope above threshold
    lambda_th: float = 0.75


@dataclass
class SceneConfig:
    arm: ArmModel = field(default_factory=ArmModel)
    reward: RewardWeights = field(default_factory=RewardWeights)
    home_q: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.5, 0.5, 0.4, 0.3, 0.2]))
    home_wrist: float = 0.8
    home_aperture: float = 0.8
    reset_jitter: float = 0.05
    object_box: np.ndarray = field(
        default_factory=lambda: np.array([[0.35, 0.65], [-0.25, 0.25]]))
    workspace_bounds: np.ndarray = field(
        default_factory=lambda: np.array([[-1.2, 1.2], [-1.2, 1.2], [-1.0, 1.5]]))
    wrist_limits: tuple[float, float] = (-np.pi, np.pi)
    dq_scale: float = 0.05
    wrist_scale: float = 0.05
    aperture_scale: float = 0.1
    # the gap between these shells must be crossed in one step, and the
    # success ball must be wide relative to the per-step hand motion or the
    # success/contact cliff is unresolvable for function approximators
    success_dist_slack: float = 0.025
    contact_dist_slack: float = 0.03
    # grasp target sits mid-ball above the object: close to the center the
    # alignment cosine is ill-conditioned (small lateral error, huge angle)
    grip_offset: float = 0.012
    max_steps: int = MAX_STEPS

    def __post_init__(self):
        self.home_q = np.asarray(self.home_q, dtype=np.float64)
        self.object_box = np.asarray(self.object_box, dtype=np.float64)
        self.workspace_bounds = np.asarray(self.workspace_bounds, dtype=np.float64)

    def to_dict(self) -> dict:
        d = {
            "arm": {
                "link_lengths": self.arm.link_lengths.tolist(),
                "joint_limits": self.arm.joint_limits.tolist(),
                "base_position": self.arm.base_position.tolist(),
            },
            "reward": asdict(self.reward),
            "home_q": self.home_q.tolist(),
            "home_wrist": self.home_wrist,
            "home_aperture": self.home_aperture,
            "reset_jitter": self.reset_jitter,
            "object_box": self.object_box.tolist(),
            "workspace_bounds": self.workspace_bounds.tolist(),
            "wrist_limits": list(self.wrist_limits),
            "dq_scale": self.dq_scale,
            "wrist_scale": self.wrist_scale,
            "aperture_scale": self.aperture_scale,
            "success_dist_slack": self.success_dist_slack,
            "contact_dist_slack": self.contact_dist_slack,
            "grip_offset": self.grip_offset,
            "max_steps": self.max_steps,
            "tasks": {
                name: {
                    "object_radius": t.object_radius,
                    "object_z": t.object_z,
                    "aperture_band": list(t.aperture_band),
                    "grasp_aperture": t.grasp_aperture,
                } for name, t in TASKS.items()
            },
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        kwargs = {}
        if "arm" in d:
            kwargs["arm"] = ArmModel(
                link_lengths=np.array(d["arm"]["link_lengths"]),
                joint_limits=np.array(d["arm"]["joint_limits"]),
                base_position=np.array(d["arm"]["base_position"]),
            )
        if "reward" in d:
            kwargs["reward"] = RewardWeights(**d["reward"])
        for key in ("home_q", "object_box", "workspace_bounds"):
            if key in d:
                kwargs[key] = np.array(d[key])
        for key in ("home_wrist", "home_aperture", "reset_jitter", "dq_scale",
                    "wrist_scale", "aperture_scale", "success_dist_slack",
                    "contact_dist_slack", "grip_offset", "max_steps"):
            if key in d:
                kwargs[key] = d[key]
        if "wrist_limits" in d:
            kwargs["wrist_limits"] = tuple(d["wrist_limits"])
        return cls(**kwargs)


@dataclass
class RewardBreakdown:
    distance_term: float
    smooth_term: float
    event_term: float
    pose_term: float
    total: float
    cos_psi: float

    def as_dict(self) -> dict:
        return {
            "distance": self.distance_term,
            "smooth": self.smooth_term,
            "event": self.event_term,
            "pose": self.pose_term,
            "total": self.total,
            "cos_psi": self.cos_psi,
        }


@dataclass
class EnvState:
    q: np.ndarray
    wrist_pitch: float
    aperture: float
    nu_hand: np.ndarray
    n_hand: np.ndarray
    nu_object: np.ndarray
    object_radius: float
    prev_dist_sq: float
    step_index: int
    terminal_event: str | None
    target_obs: np.ndarray
    task: str


def cos_psi(n_hand: np.ndarray, nu_object: np.ndarray,
            nu_hand: np.ndarray) -> float:
    """Cosine between the hand normal and the hand-to-object displacement.

    Coincident points count as perfect alignment (1.0) rather than NaN.
    """
    rel = nu_object - nu_hand
    norm = float(np.linalg.norm(rel))
    if norm < 1e-9:
        return 1.0
    c = float(np.dot(n_hand, rel)) / (float(np.linalg.norm(n_hand)) * norm)
    return float(np.clip(c, -1.0, 1.0))


def pose_reward(c: float, w: RewardWeights) -> float:
    if c <= w.lambda_th:
        return w.z4 * (c - w.lambda_th)
    return w.z5 * (c - w.lambda_th)


def event_reward(event: str | None, w: RewardWeights) -> float:
    if event == SUCCESS:
        return w.z1
    if event == COLLISION:
        return -w.z2
    if event == CONTACT:
        return -w.z3
    return 0.0


def build_observation(q, nu_hand, n_hand, nu_object, aperture) -> np.ndarray:
    obs = np.empty(OBS_DIM)
    obs[OBS_Q] = q
    obs[OBS_HAND] = nu_hand
    obs[OBS_NORMAL] = n_hand
    obs[OBS_OBJECT] = nu_object
    rel = nu_object - nu_hand
    obs[OBS_REL] = rel
    obs[OBS_APERTURE] = aperture
    obs[OBS_DIST] = np.linalg.norm(rel)
    return obs


class GraspEnv:
    """Single-threaded environment instance; run several with independent seeds
    for parallel evaluation."""

    def __init__(self, task: str = "ball", scene: SceneConfig | None = None):
        if task not in TASKS:
            raise ValueError(f"unknown task {task!r}; expected one of {sorted(TASKS)}")
        self.task = TASKS[task]
        self.scene = scene or SceneConfig()
        self.state: EnvState | None = None

    # -- target construction ------------------------------------------------

    def grasp_point(self, nu_object: np.ndarray) -> np.ndarray:
        return nu_object + np.array(
            [0.0, 0.0, self.task.object_radius + self.scene.grip_offset])

    def target_state(self, q_seed: np.ndarray, nu_object: np.ndarray) -> np.ndarray:
        """The observation the agent would have at the grasp pose.

        Joint entries come from a damped-least-squares IK solve; pose entries
        are the ideal grasp pose itself. On IK failure the joint entries fall
        back to the seed configuration.
        """
        arm = self.scene.arm
        target_hand = self.grasp_point(nu_object)
        q_ik, residual, converged = kin.solve_ik(
            q_seed, target_hand, arm.link_lengths, arm.base_position,
            arm.joint_limits)
        if not converged:
            log.warning("IK failed for target %s (residual %.4f); "
                        "using pose-only target", target_hand, residual)
            q_ik = q_seed.copy()
        n_target = nu_object - target_hand
        n_target = n_target / np.linalg.norm(n_target)
        return build_observation(q_ik, target_hand, n_target, nu_object,
                                 self.task.grasp_aperture)

    # -- episode lifecycle ---------------------------------------------------

    def reset(self, seed: int) -> tuple[EnvState, np.ndarray]:
        rng = np.random.default_rng(seed)
        sc = self.scene
        arm = sc.arm
        q = np.clip(
            sc.home_q + rng.uniform(-sc.reset_jitter, sc.reset_jitter, 6),
            arm.joint_limits[:, 0], arm.joint_limits[:, 1])
        while True:
            xy = rng.uniform(sc.object_box[:, 0], sc.object_box[:, 1])
            nu_object = np.array([xy[0], xy[1], self.task.object_z])
            if np.linalg.norm(nu_object - arm.base_position) <= arm.reach:
                break
        nu_hand = kin.hand_position(q, arm.link_lengths, arm.base_position)
        n_hand = kin.hand_normal(q, sc.home_wrist)
        target_obs = self.target_state(q, nu_object)
        obs = build_observation(q, nu_hand, n_hand, nu_object, sc.home_aperture)
        self.state = EnvState(
            q=q, wrist_pitch=sc.home_wrist, aperture=sc.home_aperture,
            nu_hand=nu_hand, n_hand=n_hand, nu_object=nu_object,
            object_radius=self.task.object_radius,
            prev_dist_sq=float(np.sum((obs - target_obs) ** 2)),
            step_index=0, terminal_event=None, target_obs=target_obs,
            task=self.task.name)
        return self.state, obs

    def _detect_event(self, dist: float, c: float, aperture: float,
                      q: np.ndarray) -> str | None:
        sc = self.scene
        radius = self.task.object_radius
        lo, hi = self.task.aperture_band
        if (dist <= radius + sc.success_dist_slack
                and c >= sc.reward.lambda_th and lo <= aperture <= hi):
            return SUCCESS
        pts = kin.chain_sample_points(q, sc.arm.link_lengths, sc.arm.base_position)
        hand = pts[6]
        out_of_bounds = bool(
            np.any(hand < sc.workspace_bounds[:, 0])
            or np.any(hand > sc.workspace_bounds[:, 1]))
        if np.any(pts[:, 2] < 0.0) or out_of_bounds:
            return COLLISION
        if dist <= radius + sc.contact_dist_slack:
            return CONTACT
        return None

    def step(self, action: np.ndarray
             ) -> tuple[EnvState, np.ndarray, RewardBreakdown, bool]:
        st = self.state
        if st is None:
            raise EpisodeDoneError("reset() must be called before step()")
        if st.terminal_event is not None or st.step_index >= self.scene.max_steps:
            raise EpisodeDoneError(
                f"episode already finished (event={st.terminal_event}, "
                f"step={st.step_index})")
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (ACT_DIM,):
            raise ValueError(f"action must have shape ({ACT_DIM},), got {action.shape}")
        if not np.all(np.isfinite(action)):
            raise DegenerateActionError(f"non-finite action: {action}")
        action = np.clip(action, -1.0, 1.0)

        sc = self.scene
        arm = sc.arm
        q = np.clip(st.q + action[ACT_JOINTS] * sc.dq_scale,
                    arm.joint_limits[:, 0], arm.joint_limits[:, 1])
        wrist = float(np.clip(st.wrist_pitch + action[ACT_WRIST] * sc.wrist_scale,
                              sc.wrist_limits[0], sc.wrist_limits[1]))
        aperture = float(np.clip(st.aperture + action[ACT_APERTURE] * sc.aperture_scale,
                                 0.0, 1.0))
        nu_hand = kin.hand_position(q, arm.link_lengths, arm.base_position)
        n_hand = kin.hand_normal(q, wrist)

        dist = float(np.linalg.norm(st.nu_object - nu_hand))
        c = cos_psi(n_hand, st.nu_object, nu_hand)
        event = self._detect_event(dist, c, aperture, q)

        obs = build_observation(q, nu_hand, n_hand, st.nu_object, aperture)
        dist_sq = float(np.sum((obs - st.target_obs) ** 2))
        w = sc.reward
        breakdown = RewardBreakdown(
            distance_term=-dist_sq,
            smooth_term=w.xi1 * (st.prev_dist_sq - dist_sq),
            event_term=w.xi2 * event_reward(event, w),
            pose_term=w.xi3 * pose_reward(c, w),
            total=0.0,
            cos_psi=c,
        )
        breakdown.total = (breakdown.distance_term + breakdown.smooth_term
                           + breakdown.event_term + breakdown.pose_term)

        st.q = q
        st.wrist_pitch = wrist
        st.aperture = aperture
        st.nu_hand = nu_hand
        st.n_hand = n_hand
        st.prev_dist_sq = dist_sq
        st.step_index += 1
        st.terminal_event = event
        done = event is not None or st.step_index >= sc.max_steps
        return st, obs, breakdown, done


def trace_record(t: int, obs: np.ndarray, action: np.ndarray,
                 breakdown: RewardBreakdown, event: str | None,
                 done: bool) -> dict:
    return {
        "t": t,
        "obs": [float(x) for x in obs],
        "action": [float(x) for x in action],
        "reward_breakdown": breakdown.as_dict(),
        "event": event or NO_EVENT,
        "done": bool(done),
    }


def write_trace(path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
