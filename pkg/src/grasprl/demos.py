"""Expert demonstration storage: trajectory records, JSON-lines files, and
uniform state-action pair sampling for behavior cloning and the contrastive
head.

File layout (one demo set per file):
    line 1   header {"version": 1, "task", "obs_dim": 20, "act_dim": 8,
                     "source", "trajectories": [{"seed", "created_at"}, ...]}
    line 2+  one step each {"t", "obs": [20], "act": [8], "r", "event", "done"}

Floats are written with 17 significant digits so that save/load round trips
are bit-exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .env import ACT_DIM, OBS_DIM

FILE_VERSION = 1


class DemoFormatError(ValueError):
    """A demonstration file or record violates the format contract."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class TrajStep:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    event: str
    done: bool


@dataclass
class Trajectory:
    task: str
    seed: int
    steps: list[TrajStep]
    source: str = "scripted"
    created_at: str = field(default_factory=_now_iso)

    def validate(self) -> None:
        if not self.steps:
            raise DemoFormatError("trajectory has no steps")
        for i, s in enumerate(self.steps):
            if np.asarray(s.obs).shape != (OBS_DIM,):
                raise DemoFormatError(
                    f"step {i}: obs has {np.asarray(s.obs).size} elements, "
                    f"expected {OBS_DIM}")
            if np.asarray(s.action).shape != (ACT_DIM,):
                raise DemoFormatError(
                    f"step {i}: action has {np.asarray(s.action).size} elements, "
                    f"expected {ACT_DIM}")
            if s.done != (i == len(self.steps) - 1):
                raise DemoFormatError(
                    f"step {i}: done flag must be set exactly on the last step")

    @property
    def succeeded(self) -> bool:
        return self.steps[-1].event == "success"


class DemoSet:
    """Immutable-after-construction set of trajectories with a flattened
    (state, action) pair index for uniform sampling."""

    def __init__(self, trajectories: list[Trajectory]):
        for t in trajectories:
            t.validate()
        self.trajectories = list(trajectories)
        if self.trajectories:
            self.states = np.array(
                [s.obs for t in self.trajectories for s in t.steps])
            self.actions = np.array(
                [s.action for t in self.trajectories for s in t.steps])
        else:
            self.states = np.zeros((0, OBS_DIM))
            self.actions = np.zeros((0, ACT_DIM))

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def num_pairs(self) -> int:
        return self.states.shape[0]

    def sample_pairs(self, batch_size: int,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Uniform with replacement over every (s, a) pair in the set."""
        if self.num_pairs == 0:
            raise DemoFormatError("cannot sample from an empty demo set")
        idx = rng.integers(0, self.num_pairs, size=batch_size)
        return self.states[idx], self.actions[idx]

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        header = {
            "version": FILE_VERSION,
            "task": self.trajectories[0].task if self.trajectories else "ball",
            "obs_dim": OBS_DIM,
            "act_dim": ACT_DIM,
            "source": self.trajectories[0].source if self.trajectories else "scripted",
            "trajectories": [
                {"seed": t.seed, "created_at": t.created_at}
                for t in self.trajectories
            ],
        }
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps(header) + "\n")
            for traj in self.trajectories:
                for t, s in enumerate(traj.steps):
                    obs = ", ".join(_fmt(x) for x in s.obs)
                    act = ", ".join(_fmt(x) for x in s.action)
                    f.write(
                        '{"t": %d, "obs": [%s], "act": [%s], "r": %s, '
                        '"event": %s, "done": %s}\n'
                        % (t, obs, act, _fmt(s.reward),
                           json.dumps(s.event), "true" if s.done else "false"))

    @classmethod
    def load(cls, path) -> "DemoSet":
        with open(path, "r", encoding="utf-8") as f:
            header_line = f.readline()
            if not header_line:
                raise DemoFormatError(f"{path}: empty file")
            try:
                header = json.loads(header_line)
            except json.JSONDecodeError as e:
                raise DemoFormatError(f"{path}: unreadable header: {e}") from e
            if header.get("version") != FILE_VERSION:
                raise DemoFormatError(
                    f"{path}: unknown version {header.get('version')!r}")
            for key in ("task", "obs_dim", "act_dim", "source"):
                if key not in header:
                    raise DemoFormatError(f"{path}: header missing {key!r}")
            if header["obs_dim"] != OBS_DIM or header["act_dim"] != ACT_DIM:
                raise DemoFormatError(
                    f"{path}: dimensions {header['obs_dim']}/{header['act_dim']} "
                    f"do not match expected {OBS_DIM}/{ACT_DIM}")
            meta = header.get("trajectories", [])

            trajectories: list[Trajectory] = []
            steps: list[TrajStep] = []
            for lineno, line in enumerate(f, start=2):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DemoFormatError(f"{path}:{lineno}: bad record: {e}") from e
                obs = np.asarray(rec.get("obs", []), dtype=np.float64)
                act = np.asarray(rec.get("act", []), dtype=np.float64)
                if obs.shape != (OBS_DIM,):
                    raise DemoFormatError(
                        f"{path}:{lineno}: obs has {obs.size} elements, "
                        f"expected {OBS_DIM}")
                if act.shape != (ACT_DIM,):
                    raise DemoFormatError(
                        f"{path}:{lineno}: act has {act.size} elements, "
                        f"expected {ACT_DIM}")
                if rec.get("t") != len(steps):
                    raise DemoFormatError(
                        f"{path}:{lineno}: step index {rec.get('t')} out of order")
                steps.append(TrajStep(obs=obs, action=act,
                                      reward=float(rec["r"]),
                                      event=str(rec["event"]),
                                      done=bool(rec["done"])))
                if rec["done"]:
                    k = len(trajectories)
                    info = meta[k] if k < len(meta) else {}
                    trajectories.append(Trajectory(
                        task=header["task"], seed=int(info.get("seed", -1)),
                        steps=steps, source=header["source"],
                        created_at=str(info.get("created_at", ""))))
                    steps = []
            if steps:
                raise DemoFormatError(
                    f"{path}: truncated file, last trajectory never finished")
            if meta and len(meta) != len(trajectories):
                raise DemoFormatError(
                    f"{path}: header lists {len(meta)} trajectories, "
                    f"file contains {len(trajectories)}")
        return cls(trajectories)


def sample_expert_batch(demo_set: DemoSet, batch_size: int,
                        seed: int) -> tuple[np.ndarray, np.ndarray]:
    return demo_set.sample_pairs(batch_size, np.random.default_rng(seed))
