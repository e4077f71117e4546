"""Run orchestration: the two-phase training loop, greedy evaluation, and the
three-way ablation runner (scratch SAC, BC+SAC, BC+SAC+contrastive).

An iteration is a fixed block of environment steps with matching gradient
updates, followed by one evaluation pass over a fixed set of seeded episodes.
All randomness in a run derives from the run seed through named generator
streams, so two runs that share streams are bit-identical wherever their
configurations agree (the ablation-switch guarantee).
"""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .bc import BcConfig, pretrain
from .contrastive import ClConfig, ProjectionHead, head_update
from .demos import DemoSet
from .env import GraspEnv, SceneConfig, trace_record, write_trace
from .nn import Adam, load_checkpoint, save_checkpoint, polyak_update
from .sac import (PolicyNet, QNet, ReplayBuffer, SacConfig, actor_update,
                  critic_update, target_q)

log = logging.getLogger(__name__)

METHODS = ("sac", "bc_sac", "bc_sac_cl")

METRIC_COLUMNS = ("iter", "env_steps", "mean_reward", "success_rate",
                  "l_q1", "l_q2", "l_pi", "l_cl", "entropy_estimate")

# generator stream names, spawned in this fixed order from the run seed
_STREAMS = ("init_actor", "init_q1", "init_q2", "init_head", "bc",
            "env_seeds", "explore", "rollout", "buffer", "target",
            "actor_noise", "expert_batch", "cl_noise", "eval_seeds")


class RunConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    task: str = "ball"
    seed: int = 0
    method: str = "bc_sac_cl"
    total_iterations: int = 50
    steps_per_iteration: int = 2000
    eval_episodes: int = 100
    demo_path: str | None = None
    output_dir: str = "runs/latest"
    checkpoint_every_iteration: bool = False
    save_buffer: bool = False
    # preload the demo transitions into the replay buffer for the bc methods:
    # without them the critics see no success events for many iterations and
    # the pretrained dive behavior is unlearned before it can be valued
    seed_buffer_with_demos: bool = True
    sac: SacConfig = field(default_factory=SacConfig)
    # pipeline default trains longer than the bare BcConfig: 15 demos give few
    # pairs per epoch and the regression keeps improving well past 200 epochs
    bc: BcConfig = field(default_factory=lambda: BcConfig(
        epochs=8000, target_mse=5e-4))
    cl: ClConfig = field(default_factory=ClConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise RunConfigError(
                f"method must be one of {METHODS}, got {self.method!r}")
        if self.total_iterations < 0 or self.steps_per_iteration <= 0:
            raise RunConfigError("iteration counts must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sac"] = asdict(self.sac)
        d["bc"] = asdict(self.bc)
        d["cl"] = asdict(self.cl)
        d["scene"] = self.scene.to_dict()
        for cfg in ("sac", "cl"):
            hidden = d[cfg].get("hidden")
            if hidden is not None:
                d[cfg]["hidden"] = list(hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        kwargs = dict(d)
        if "sac" in kwargs:
            sac = dict(kwargs["sac"])
            if "hidden" in sac:
                sac["hidden"] = tuple(sac["hidden"])
            kwargs["sac"] = SacConfig(**sac)
        if "bc" in kwargs:
            kwargs["bc"] = BcConfig(**kwargs["bc"])
        if "cl" in kwargs:
            cl = dict(kwargs["cl"])
            if "hidden" in cl:
                cl["hidden"] = tuple(cl["hidden"])
            kwargs["cl"] = ClConfig(**cl)
        if "scene" in kwargs:
            kwargs["scene"] = SceneConfig.from_dict(kwargs["scene"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass
class IterationMetrics:
    iter: int
    env_steps: int
    mean_reward: float
    success_rate: float
    l_q1: float
    l_q2: float
    l_pi: float
    l_cl: float
    entropy_estimate: float
    wall_seconds: float

    def csv_row(self) -> str:
        vals = [self.iter, self.env_steps, self.mean_reward, self.success_rate,
                self.l_q1, self.l_q2, self.l_pi, self.l_cl,
                self.entropy_estimate]
        return ",".join(repr(v) if isinstance(v, float) else str(v)
                        for v in vals)


@dataclass
class RunResult:
    run_dir: str
    metrics: list[IterationMetrics]
    final_checkpoint: str
    deployment_checkpoint: str

    @property
    def final_success(self) -> float:
        return self.metrics[-1].success_rate if self.metrics else float("nan")

    def iterations_to_threshold(self, threshold: float = 0.8) -> int | None:
        for m in self.metrics:
            if m.success_rate >= threshold:
                return m.iter
        return None


def _spawn_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(child)
            for name, child in zip(_STREAMS, children)}


class Trainer:
    """Holds the five networks, their optimizers, the buffer, and the
    per-update Algorithm step sequence."""

    def __init__(self, cfg: RunConfig, rngs: dict[str, np.random.Generator]):
        self.cfg = cfg
        self.rngs = rngs
        sac_cfg = cfg.sac
        self.actor = PolicyNet(sac_cfg, rngs["init_actor"])
        self.q1 = QNet(sac_cfg, rngs["init_q1"], name="q1")
        self.q2 = QNet(sac_cfg, rngs["init_q2"], name="q2")
        self.q1_target = self.q1.clone_target("q1_target")
        self.q2_target = self.q2.clone_target("q2_target")
        self.adam_actor = Adam(self.actor.parameters(),
                               lr=sac_cfg.actor_lr or sac_cfg.lr)
        self.adam_q1 = Adam(self.q1.parameters(), lr=sac_cfg.lr)
        self.adam_q2 = Adam(self.q2.parameters(), lr=sac_cfg.lr)
        self.buffer = ReplayBuffer(sac_cfg.buffer_capacity)
        self.head: ProjectionHead | None = None
        self.adam_head: Adam | None = None
        if cfg.method == "bc_sac_cl":
            self.head = ProjectionHead(cfg.cl, rngs["init_head"])
            self.adam_head = Adam(self.head.parameters(), lr=cfg.cl.lr)
        self.demos: DemoSet | None = None

    def update(self, critic_only: bool = False) -> dict[str, float]:
        cfg = self.cfg
        batch = self.buffer.sample(cfg.sac.batch_size, self.rngs["buffer"])
        q_bar = target_q(batch, self.q1_target, self.q2_target, self.actor,
                         cfg.sac, self.rngs["target"])
        l_q1, l_q2 = critic_update(self.q1, self.q2, self.adam_q1,
                                   self.adam_q2, batch, q_bar)
        out = {"l_q1": l_q1, "l_q2": l_q2, "l_pi": float("nan"),
               "l_cl": float("nan"), "entropy": float("nan")}
        if not critic_only:
            cl_fn = None
            if self.head is not None:
                s_e, a_e = self.demos.sample_pairs(cfg.sac.batch_size,
                                                   self.rngs["expert_batch"])
                eps_cl = self.rngs["cl_noise"].standard_normal(
                    (cfg.sac.batch_size, self.actor.act_dim))
                out["l_cl"], cl_fn = head_update(
                    self.head, self.adam_head, self.actor, s_e, a_e, eps_cl,
                    cfg.cl)
            eps = self.rngs["actor_noise"].standard_normal(
                (cfg.sac.batch_size, self.actor.act_dim))
            xi4 = cfg.cl.xi4 if self.head is not None else 0.0
            out["l_pi"], out["entropy"] = actor_update(
                self.actor, self.adam_actor, self.q1, self.q2,
                batch["states"], eps, cfg.sac, cl_term=cl_fn, xi4=xi4)
        polyak_update(self.q1_target.parameters(), self.q1.parameters(),
                      cfg.sac.tau)
        polyak_update(self.q2_target.parameters(), self.q2.parameters(),
                      cfg.sac.tau)
        return out

    # -- checkpointing --------------------------------------------------------

    def checkpoint_arrays(self, include_buffer: bool = False
                          ) -> dict[str, np.ndarray]:
        arrays: dict[str, np.ndarray] = {}
        nets = [self.actor, self.q1, self.q2, self.q1_target, self.q2_target]
        if self.head is not None:
            nets.append(self.head)
        for net in nets:
            for name, t in net.named_parameters():
                arrays[name] = t.data
        arrays.update(self.adam_actor.state_arrays("adam/actor"))
        arrays.update(self.adam_q1.state_arrays("adam/q1"))
        arrays.update(self.adam_q2.state_arrays("adam/q2"))
        if self.adam_head is not None:
            arrays.update(self.adam_head.state_arrays("adam/head"))
        if include_buffer:
            arrays["buffer/states"] = self.buffer.states[:self.buffer.size]
            arrays["buffer/actions"] = self.buffer.actions[:self.buffer.size]
            arrays["buffer/rewards"] = self.buffer.rewards[:self.buffer.size]
            arrays["buffer/next_states"] = \
                self.buffer.next_states[:self.buffer.size]
            arrays["buffer/dones"] = self.buffer.dones[:self.buffer.size]
        return arrays

    def checkpoint_meta(self, phase: str, iteration: int,
                        env_steps: int) -> dict:
        cfg = self.cfg
        return {
            "phase": phase,
            "iteration": iteration,
            "env_steps": env_steps,
            "method": cfg.method,
            "task": cfg.task,
            "seed": cfg.seed,
            "hidden": list(cfg.sac.hidden),
            "has_head": self.head is not None,
            "discardable": ([name for name, _ in self.head.named_parameters()]
                            if self.head is not None else []),
            "adam_steps": {
                "actor": self.adam_actor.step_count,
                "q1": self.adam_q1.step_count,
                "q2": self.adam_q2.step_count,
                "head": (self.adam_head.step_count
                         if self.adam_head is not None else 0),
            },
            "buffer": {"size": self.buffer.size, "cursor": self.buffer.cursor,
                       "included": False},
        }

    def save(self, path, phase: str, iteration: int, env_steps: int,
             include_buffer: bool = False) -> None:
        meta = self.checkpoint_meta(phase, iteration, env_steps)
        meta["buffer"]["included"] = include_buffer
        save_checkpoint(path, self.checkpoint_arrays(include_buffer), meta)

    def save_deployment(self, path, iteration: int, env_steps: int) -> None:
        """Final artifact: policy and critics only, no projection head, no
        optimizer state."""
        arrays: dict[str, np.ndarray] = {}
        for net in (self.actor, self.q1, self.q2):
            for name, t in net.named_parameters():
                arrays[name] = t.data
        meta = {
            "phase": "deployment",
            "iteration": iteration,
            "env_steps": env_steps,
            "method": self.cfg.method,
            "task": self.cfg.task,
            "seed": self.cfg.seed,
            "hidden": list(self.cfg.sac.hidden),
            "has_head": False,
            "discardable": [],
        }
        save_checkpoint(path, arrays, meta)


def load_actor(checkpoint_path) -> tuple[PolicyNet, dict]:
    """Rebuild a greedy-evaluable policy from any run checkpoint."""
    arrays, meta = load_checkpoint(checkpoint_path)
    cfg = SacConfig(hidden=tuple(meta["hidden"]))
    actor = PolicyNet(cfg, np.random.default_rng(0))
    for name, t in actor.named_parameters():
        if name not in arrays:
            raise RunConfigError(f"checkpoint missing actor array {name!r}")
        if arrays[name].shape != t.data.shape:
            raise RunConfigError(
                f"checkpoint array {name!r} has shape {arrays[name].shape}, "
                f"expected {t.data.shape}")
        t.data = arrays[name].copy()
    return actor, meta


def evaluate_policy(actor: PolicyNet, task: str, scene: SceneConfig,
                    episode_seeds: np.ndarray,
                    trace_path=None) -> tuple[float, float, list[dict]]:
    """Greedy rollouts (tanh of the mean head). Returns (mean_reward,
    success_rate, per-episode summaries)."""
    if len(episode_seeds) == 0:
        raise RunConfigError("evaluation needs at least one episode")
    env = GraspEnv(task, scene)
    rewards, successes, episodes = [], 0, []
    records: list[dict] = []
    for ep, ep_seed in enumerate(episode_seeds):
        state, obs = env.reset(int(ep_seed))
        total = 0.0
        done = False
        t = 0
        while not done:
            action = actor.mean_action(obs)
            state, obs, breakdown, done = env.step(action)
            if trace_path is not None:
                rec = trace_record(t, obs, action, breakdown,
                                   state.terminal_event, done)
                rec["episode"] = ep
                records.append(rec)
            total += breakdown.total
            t += 1
        rewards.append(total)
        success = state.terminal_event == "success"
        successes += success
        episodes.append({"episode": ep, "seed": int(ep_seed), "steps": t,
                         "reward": total, "event": state.terminal_event or "none",
                         "success": bool(success)})
    if trace_path is not None:
        write_trace(trace_path, records)
    return (float(np.mean(rewards)), successes / len(episode_seeds), episodes)


def train(cfg: RunConfig) -> RunResult:
    """Run the configured method end to end and write the run directory:
    config.json, metrics.csv, checkpoints, and report.json."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    with open(os.path.join(cfg.output_dir, "config.json"), "w",
              encoding="utf-8") as f:
        json.dump(cfg.to_dict(), f, indent=2)

    rngs = _spawn_streams(cfg.seed)
    trainer = Trainer(cfg, rngs)

    if cfg.method != "sac":
        if not cfg.demo_path or not os.path.exists(cfg.demo_path):
            raise RunConfigError(
                f"method {cfg.method!r} needs a demonstration file; "
                f"got {cfg.demo_path!r}")
        trainer.demos = DemoSet.load(cfg.demo_path)
        bc_result = pretrain(trainer.actor, trainer.demos, cfg.bc, rngs["bc"])
        log.info("behavior cloning: %d epochs, final loss %.3e",
                 bc_result.epochs_run, bc_result.loss_history[-1])
        trainer.save(os.path.join(cfg.output_dir, "checkpoint_bc.ckpt"),
                     phase="bc", iteration=0, env_steps=0)
        if cfg.seed_buffer_with_demos:
            for traj in trainer.demos.trajectories:
                for i, s in enumerate(traj.steps):
                    nxt = traj.steps[i + 1].obs if not s.done else s.obs
                    trainer.buffer.push(s.obs, s.action, s.reward, nxt, s.done)
        if (cfg.sac.pretrain_updates > 0
                and trainer.buffer.size >= cfg.sac.batch_size):
            # critic-only: fitting the critics to the demonstration buffer
            # must not disturb the freshly cloned policy
            for _ in range(cfg.sac.pretrain_updates):
                trainer.update(critic_only=True)

    eval_seeds = rngs["eval_seeds"].integers(0, 2**31 - 1,
                                             size=cfg.eval_episodes)
    metrics_path = os.path.join(cfg.output_dir, "metrics.csv")
    metrics: list[IterationMetrics] = []

    def run_eval(iteration: int, env_steps: int, losses: dict[str, float],
                 wall: float) -> IterationMetrics:
        mean_reward, success_rate, _ = evaluate_policy(
            trainer.actor, cfg.task, cfg.scene, eval_seeds)
        return IterationMetrics(
            iter=iteration, env_steps=env_steps, mean_reward=mean_reward,
            success_rate=success_rate,
            l_q1=losses.get("l_q1", float("nan")),
            l_q2=losses.get("l_q2", float("nan")),
            l_pi=losses.get("l_pi", float("nan")),
            l_cl=losses.get("l_cl", float("nan")),
            entropy_estimate=losses.get("entropy", float("nan")),
            wall_seconds=wall)

    with open(metrics_path, "w", encoding="utf-8") as mf:
        mf.write(",".join(METRIC_COLUMNS) + "\n")
        t_start = time.perf_counter()
        row = run_eval(0, 0, {}, 0.0)
        metrics.append(row)
        mf.write(row.csv_row() + "\n")
        mf.flush()

        env = GraspEnv(cfg.task, cfg.scene)
        obs = None
        episode_done = True
        global_step = 0
        update_budget = 0.0
        for iteration in range(1, cfg.total_iterations + 1):
            t_iter = time.perf_counter()
            loss_sums: dict[str, float] = {}
            n_updates = 0
            for _ in range(cfg.steps_per_iteration):
                if episode_done:
                    _, obs = env.reset(int(rngs["env_seeds"].integers(2**31)))
                    episode_done = False
                if global_step < cfg.sac.warmup_steps:
                    action = rngs["explore"].uniform(-1.0, 1.0,
                                                     trainer.actor.act_dim)
                else:
                    eps = rngs["rollout"].standard_normal(trainer.actor.act_dim)
                    action, _ = trainer.actor.sample_array(obs, eps)
                state, next_obs, breakdown, episode_done = env.step(action)
                trainer.buffer.push(obs, action, breakdown.total, next_obs,
                                    episode_done)
                obs = next_obs
                global_step += 1
                if global_step >= cfg.sac.warmup_steps:
                    update_budget += cfg.sac.updates_per_env_step
                while (update_budget >= 1.0
                       and trainer.buffer.size >= cfg.sac.batch_size):
                    update_budget -= 1.0
                    losses = trainer.update()
                    n_updates += 1
                    for k, v in losses.items():
                        loss_sums[k] = loss_sums.get(k, 0.0) + v
            mean_losses = {k: v / n_updates for k, v in loss_sums.items()} \
                if n_updates else {}
            row = run_eval(iteration, global_step, mean_losses,
                           time.perf_counter() - t_iter)
            metrics.append(row)
            mf.write(row.csv_row() + "\n")
            mf.flush()
            if cfg.checkpoint_every_iteration:
                trainer.save(os.path.join(
                    cfg.output_dir, f"checkpoint_iter{iteration:04d}.ckpt"),
                    phase="rl", iteration=iteration, env_steps=global_step)
            log.info("iter %d: env_steps=%d success=%.2f reward=%.1f",
                     iteration, global_step, row.success_rate, row.mean_reward)

    final_path = os.path.join(cfg.output_dir, "checkpoint_final.ckpt")
    trainer.save(final_path, phase="final", iteration=cfg.total_iterations,
                 env_steps=global_step, include_buffer=cfg.save_buffer)
    deploy_path = os.path.join(cfg.output_dir, "checkpoint_deploy.ckpt")
    trainer.save_deployment(deploy_path, cfg.total_iterations, global_step)

    report = {
        "config": cfg.to_dict(),
        "final_success_rate": metrics[-1].success_rate,
        "final_mean_reward": metrics[-1].mean_reward,
        "iterations_to_threshold": RunResult(
            cfg.output_dir, metrics, final_path,
            deploy_path).iterations_to_threshold(),
        "total_wall_seconds": time.perf_counter() - t_start,
        "per_iteration_wall_seconds": [m.wall_seconds for m in metrics],
    }
    with open(os.path.join(cfg.output_dir, "report.json"), "w",
              encoding="utf-8") as f:
        json.dump(report, f, indent=2)
    return RunResult(cfg.output_dir, metrics, final_path, deploy_path)


def evaluate_checkpoint(checkpoint_path, task: str, n_episodes: int, seed: int,
                        scene: SceneConfig | None = None,
                        trace_path=None) -> tuple[float, float, list[dict]]:
    if n_episodes <= 0:
        raise RunConfigError("n_episodes must be positive")
    actor, meta = load_actor(checkpoint_path)
    scene = scene or SceneConfig()
    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=n_episodes)
    return evaluate_policy(actor, task, scene, seeds, trace_path=trace_path)


SUCCESS_THRESHOLD = 0.8


def ablation(base_cfg: RunConfig, seeds: list[int],
             methods: tuple[str, ...] = METHODS) -> dict:
    """Run every method on every seed and emit the comparison report,
    convergence curves (PNG + CSV), and per-method medians."""
    out_dir = base_cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    warnings = []
    if len(seeds) < 3:
        warnings.append(
            f"only {len(seeds)} seed(s): medians are a small-sample estimate")

    runs: dict[str, dict[int, RunResult | None]] = {m: {} for m in methods}
    failures: list[str] = []
    for method in methods:
        for seed in seeds:
            cfg = replace(
                base_cfg, method=method, seed=seed,
                output_dir=os.path.join(out_dir, f"{method}_seed{seed}"))
            try:
                runs[method][seed] = train(cfg)
            except Exception as e:  # partial report on any run failure
                log.exception("run %s seed %d failed", method, seed)
                runs[method][seed] = None
                failures.append(f"{method} seed {seed}: {e}")

    not_reached = base_cfg.total_iterations + 1
    summary: dict[str, dict] = {}
    for method in methods:
        ok = [r for r in runs[method].values() if r is not None]
        finals = [r.final_success for r in ok]
        rewards = [r.metrics[-1].mean_reward for r in ok]
        reach = [r.iterations_to_threshold(SUCCESS_THRESHOLD) for r in ok]
        reach_filled = [x if x is not None else not_reached for x in reach]
        summary[method] = {
            "seeds": [s for s, r in runs[method].items() if r is not None],
            "final_success_rates": finals,
            "median_final_success": float(np.median(finals)) if finals else None,
            "final_mean_rewards": rewards,
            "median_final_mean_reward": (float(np.median(rewards))
                                         if rewards else None),
            "iterations_to_threshold": reach,
            "median_iterations_to_threshold": (float(np.median(reach_filled))
                                               if reach_filled else None),
            "threshold": SUCCESS_THRESHOLD,
            "not_reached_sentinel": not_reached,
        }

    report = {
        "config": base_cfg.to_dict(),
        "seeds": list(seeds),
        "methods": list(methods),
        "summary": summary,
        "failures": failures,
        "warnings": warnings,
    }
    with open(os.path.join(out_dir, "ablation_report.json"), "w",
              encoding="utf-8") as f:
        json.dump(report, f, indent=2)

    _write_curves(out_dir, runs, methods)
    return report


def _write_curves(out_dir: str, runs: dict, methods: tuple[str, ...]) -> None:
    """Reward-vs-iteration curves for every run, plus a combined CSV."""
    csv_path = os.path.join(out_dir, "curves.csv")
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write("method,seed,iter,env_steps,mean_reward,success_rate\n")
        for method in methods:
            for seed, result in runs[method].items():
                if result is None:
                    continue
                for m in result.metrics:
                    f.write(f"{method},{seed},{m.iter},{m.env_steps},"
                            f"{m.mean_reward!r},{m.success_rate!r}\n")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(12, 4.5))
    colors = {"sac": "tab:red", "bc_sac": "tab:orange",
              "bc_sac_cl": "tab:blue"}
    for method in methods:
        series_r, series_s = [], []
        for result in runs[method].values():
            if result is None:
                continue
            iters = [m.iter for m in result.metrics]
            series_r.append([m.mean_reward for m in result.metrics])
            series_s.append([m.success_rate for m in result.metrics])
            axes[0].plot(iters, series_r[-1], color=colors.get(method),
                         alpha=0.25, linewidth=0.8)
            axes[1].plot(iters, series_s[-1], color=colors.get(method),
                         alpha=0.25, linewidth=0.8)
        if series_r:
            med_r = np.median(np.array(series_r), axis=0)
            med_s = np.median(np.array(series_s), axis=0)
            axes[0].plot(iters, med_r, color=colors.get(method), linewidth=2,
                         label=method)
            axes[1].plot(iters, med_s, color=colors.get(method), linewidth=2,
                         label=method)
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("mean evaluation reward")
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("success rate")
    axes[1].axhline(SUCCESS_THRESHOLD, color="gray", linestyle=":",
                    linewidth=1)
    for ax in axes:
        ax.legend()
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "curves.png"), dpi=120)
    plt.close(fig)
