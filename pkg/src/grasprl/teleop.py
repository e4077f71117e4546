"""WebSocket teleoperation endpoint: a human (or scripted client) steers the
live simulator and successful episodes are recorded as demonstrations.

Wire protocol (JSON text frames):
    server -> client
        {"type": "hello", "obs_dim": 20, "act_dim": 8, "tick_hz": 20}
        {"type": "state", "t": n, "obs": [20], "reward": r, "event": e,
         "done": b}
        {"type": "saved", "path": p}
        {"type": "busy"}
        {"type": "error", "msg": m}
    client -> server
        {"type": "action", "a": [8]}
        {"type": "reset", "seed": n}
        {"type": "quit"}

Unknown fields are ignored; unknown types yield an error frame without
tearing the session down. One session at a time: a second client receives a
busy frame and is closed. The environment ticks at a fixed rate, applying the
most recent action frame (zero if none arrived since the last tick).
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time

import numpy as np

from .demos import DemoSet, Trajectory, TrajStep
from .env import ACT_DIM, OBS_DIM, GraspEnv, SceneConfig
from .expert import ScriptedExpert

log = logging.getLogger(__name__)


class TeleopSession:
    """Single-client episode loop behind a websocket connection."""

    def __init__(self, task: str, seed: int, out_dir: str,
                 scene: SceneConfig | None = None, tick_hz: float = 20.0,
                 keep_failures: bool = False):
        self.task = task
        self.out_dir = out_dir
        self.scene = scene or SceneConfig()
        self.tick_hz = tick_hz
        self.keep_failures = keep_failures
        self.env = GraspEnv(task, self.scene)
        self.seed = seed
        self.episode_count = 0
        self.saved_paths: list[str] = []

    def hello_frame(self) -> dict:
        return {"type": "hello", "obs_dim": OBS_DIM, "act_dim": ACT_DIM,
                "tick_hz": self.tick_hz}

    def run(self, recv_pending, send) -> None:
        """Drive the session until quit/disconnect.

        ``recv_pending()`` returns all frames received since the last call
        (possibly empty); ``send(frame_dict)`` transmits one frame. Each
        episode opens with a t=0 state frame carrying the reset observation;
        subsequent frames follow each simulator tick.
        """
        send(self.hello_frame())

        def begin_episode(seed: int):
            self.seed = seed
            _, first_obs = self.env.reset(seed)
            send({"type": "state", "t": 0,
                  "obs": [float(x) for x in first_obs],
                  "reward": 0.0, "event": "none", "done": False})
            return first_obs

        obs = begin_episode(self.seed)
        steps: list[TrajStep] = []
        episode_live = True
        pending_action = np.zeros(ACT_DIM)
        period = 1.0 / self.tick_hz
        next_tick = time.monotonic() + period
        while True:
            for raw in recv_pending():
                frame = self._parse(raw, send)
                if frame is None:
                    continue
                kind = frame.get("type")
                if kind == "quit":
                    return
                if kind == "reset":
                    obs = begin_episode(int(frame.get("seed", self.seed + 1)))
                    steps = []
                    episode_live = True
                    pending_action = np.zeros(ACT_DIM)
                elif kind == "action":
                    action = frame.get("a")
                    if (not isinstance(action, list)
                            or len(action) != ACT_DIM
                            or not all(isinstance(x, (int, float))
                                       for x in action)):
                        send({"type": "error",
                              "msg": f"action must be a list of {ACT_DIM} "
                                     f"numbers"})
                    else:
                        pending_action = np.clip(
                            np.asarray(action, dtype=np.float64), -1.0, 1.0)
                else:
                    send({"type": "error", "msg": f"unknown type {kind!r}"})

            now = time.monotonic()
            if now < next_tick:
                time.sleep(min(next_tick - now, period))
                continue
            next_tick += period
            if not episode_live:
                continue
            state, next_obs, breakdown, done = self.env.step(pending_action)
            steps.append(TrajStep(obs=obs.copy(), action=pending_action.copy(),
                                  reward=breakdown.total,
                                  event=state.terminal_event or "none",
                                  done=done))
            obs = next_obs
            send({"type": "state", "t": state.step_index,
                  "obs": [float(x) for x in obs],
                  "reward": breakdown.total,
                  "event": state.terminal_event or "none", "done": done})
            pending_action = np.zeros(ACT_DIM)
            if done:
                episode_live = False
                self._finish_episode(state.terminal_event, steps, send)
                steps = []

    def _parse(self, raw: str, send) -> dict | None:
        try:
            frame = json.loads(raw)
        except json.JSONDecodeError:
            send({"type": "error", "msg": "malformed frame"})
            return None
        if not isinstance(frame, dict):
            send({"type": "error", "msg": "frame must be an object"})
            return None
        return frame

    def _finish_episode(self, event: str | None, steps: list[TrajStep],
                        send) -> None:
        succeeded = event == "success"
        if not steps:
            return
        if succeeded or self.keep_failures:
            traj = Trajectory(task=self.task, seed=self.seed, steps=steps,
                              source="teleop")
            os.makedirs(self.out_dir, exist_ok=True)
            path = os.path.join(
                self.out_dir, f"teleop_ep{self.episode_count:04d}.jsonl")
            DemoSet([traj]).save(path)
            self.saved_paths.append(path)
            send({"type": "saved", "path": path})
        self.episode_count += 1


class TeleopServer:
    """Serves one TeleopSession over websockets; extra clients get busy."""

    def __init__(self, port: int, task: str, seed: int, out_dir: str,
                 scene: SceneConfig | None = None, tick_hz: float = 20.0,
                 keep_failures: bool = False, host: str = "127.0.0.1"):
        self.session = TeleopSession(task, seed, out_dir, scene, tick_hz,
                                     keep_failures)
        self.host = host
        self.port = port
        self._lock = threading.Lock()
        self._server = None

    def _handler(self, connection) -> None:
        if not self._lock.acquire(blocking=False):
            connection.send(json.dumps({"type": "busy"}))
            connection.close()
            return
        try:
            def recv_pending():
                frames = []
                while True:
                    try:
                        frames.append(connection.recv(timeout=0))
                    except TimeoutError:
                        break
                return frames

            def send(frame: dict):
                connection.send(json.dumps(frame))

            self.session.run(recv_pending, send)
        except Exception as e:  # disconnect mid-episode discards it
            log.info("teleop session ended: %s", e)
        finally:
            self._lock.release()

    def serve_forever(self) -> None:
        from websockets.sync.server import serve

        with serve(self._handler, self.host, self.port) as server:
            self._server = server
            log.info("teleop server on ws://%s:%d", self.host, self.port)
            server.serve_forever()

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        for _ in range(100):
            if self._server is not None:
                break
            time.sleep(0.02)
        return thread

    def shutdown(self) -> None:
        if self._server is not None:
            self._server.shutdown()


class HelloMismatchError(ConnectionError):
    """Server dimensions do not match this client."""


class ScriptedTeleopClient:
    """Protocol client that drives the session with scripted-expert actions.

    Doubles as the conformance fixture for the browser panel: it validates the
    hello frame, sends one action per state frame, and collects saved paths.
    """

    def __init__(self, url: str, task: str,
                 scene: SceneConfig | None = None, noise_scale: float = 0.0):
        self.url = url
        self.task = task
        # a brisk driving profile: teleop episodes must finish inside the
        # 100-step cap even when some ticks apply the default zero action
        self.expert = ScriptedExpert(task, scene, noise_scale,
                                     np.random.default_rng(0),
                                     approach_speed=0.7, wrist_speed=0.9)
        self.saved_paths: list[str] = []

    def run_episodes(self, seeds: list[int], timeout: float = 120.0) -> list[str]:
        from websockets.sync.client import connect

        with connect(self.url) as ws:
            hello = json.loads(ws.recv(timeout=timeout))
            if hello.get("type") == "busy":
                raise ConnectionError("server busy")
            if hello.get("type") != "hello":
                raise ConnectionError(f"expected hello, got {hello}")
            if hello.get("obs_dim") != OBS_DIM or hello.get("act_dim") != ACT_DIM:
                raise HelloMismatchError(
                    f"dimension mismatch: server speaks "
                    f"{hello.get('obs_dim')}/{hello.get('act_dim')}, "
                    f"client needs {OBS_DIM}/{ACT_DIM}")
            for seed in seeds:
                ws.send(json.dumps({"type": "reset", "seed": int(seed)}))
                deadline = time.monotonic() + timeout
                done = False
                saw_reset_frame = False
                success = False
                while not done:
                    if time.monotonic() > deadline:
                        raise TimeoutError("episode did not finish in time")
                    frame = json.loads(ws.recv(timeout=timeout))
                    kind = frame.get("type")
                    if kind == "state":
                        # skip stale frames from before the reset took effect
                        if not saw_reset_frame:
                            if frame["t"] != 0:
                                continue
                            saw_reset_frame = True
                        obs = np.asarray(frame["obs"], dtype=np.float64)
                        done = bool(frame["done"])
                        success = frame.get("event") == "success"
                        if not done:
                            action = self.expert.action(obs)
                            ws.send(json.dumps(
                                {"type": "action",
                                 "a": [float(x) for x in action]}))
                    elif kind == "saved":
                        self.saved_paths.append(frame["path"])
                    elif kind == "error":
                        raise ConnectionError(f"server error: {frame['msg']}")
                if success:
                    # the saved notice follows the terminal state frame
                    frame = json.loads(ws.recv(timeout=timeout))
                    if frame.get("type") == "saved":
                        self.saved_paths.append(frame["path"])
            ws.send(json.dumps({"type": "quit"}))
        return self.saved_paths
