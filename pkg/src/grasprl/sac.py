"""Soft actor-critic core: squashed-Gaussian policy, twin Q critics with
Polyak-averaged targets, replay buffer, and the critic/actor update steps.

The actor loss optionally carries a weighted contrastive term supplied by the
projection-head module; with weight zero the update is bit-identical to plain
SAC.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .env import ACT_DIM, OBS_DIM
from .nn import Adam, Mlp, freeze

LOG_2PI = float(np.log(2.0 * np.pi))
LOG_2 = float(np.log(2.0))


@dataclass
class SacConfig:
    gamma: float = 0.98
    alpha: float = 1.0
    tau: float = 0.005
    batch_size: int = 512
    lr: float = 7.3e-4
    # the actor may need a finer step than the critics: Adam moves the policy
    # mean by roughly actor_lr * fan_in per update regardless of gradient
    # scale, and that motion must stay below the success-ridge width
    actor_lr: float | None = None  # None: use lr
    hidden: tuple[int, int] = (256, 256)
    buffer_capacity: int = 300_000
    updates_per_env_step: float = 1.0
    warmup_steps: int = 1000
    # critic-only update iterations run on the (demo-seeded) buffer before
    # any phase-2 rollout, so the critics encode the success payout while the
    # pretrained policy is still on it; effective once the buffer holds a batch
    pretrain_updates: int = 0
    log_scale_min: float = -5.0
    log_scale_max: float = 2.0
    log_scale_init: float = -1.0
    # pre-tanh mean clamp: with Table-I scale rewards the critics' corner
    # extrapolation otherwise drags the mean into deep tanh saturation faster
    # than the entropy term can resist (tanh(3) = 0.995, so no authority lost)
    mean_clamp: float = 3.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")


class PolicyNet:
    """Squashed-Gaussian actor: a shared trunk feeding a mean head and a
    clamped log-scale head. Sampled actions live in (-1, 1)^8."""

    def __init__(self, cfg: SacConfig, rng: np.random.Generator,
                 obs_dim: int = OBS_DIM, act_dim: int = ACT_DIM,
                 name: str = "actor"):
        h1, h2 = cfg.hidden
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.trunk = Mlp([obs_dim, h1, h2], rng, output_activation="relu",
                         name=f"{name}/trunk")
        self.mean_head = Mlp([h2, act_dim], rng, name=f"{name}/mean")
        self.log_scale_head = Mlp([h2, act_dim], rng, name=f"{name}/log_scale")
        # state-independent exploration scale at initialization
        w, b = self.log_scale_head.layers[0]
        w.data[:] = 0.0
        b.data[:] = cfg.log_scale_init

    def parameters(self) -> list[Tensor]:
        return (self.trunk.parameters() + self.mean_head.parameters()
                + self.log_scale_head.parameters())

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [(p.name, p) for p in self.parameters()]

    # -- tape paths ----------------------------------------------------------

    def heads(self, states: Tensor) -> tuple[Tensor, Tensor]:
        h = self.trunk(states)
        mean = ad.clip(self.mean_head(h), -self.cfg.mean_clamp,
                       self.cfg.mean_clamp)
        log_scale = ad.clip(self.log_scale_head(h),
                            self.cfg.log_scale_min, self.cfg.log_scale_max)
        return mean, log_scale

    def sample(self, states: Tensor,
               eps: np.ndarray) -> tuple[Tensor, Tensor]:
        """Reparameterized action and its log-density.

        log pi = log N(u; mean, scale^2) - sum_j log(1 - tanh^2(u_j)), with the
        squash correction in the stable form 2(log 2 - u - softplus(-2u)).
        """
        mean, log_scale = self.heads(states)
        scale = ad.exp(log_scale)
        u = mean + scale * Tensor(eps)
        action = ad.tanh(u)
        # log N(u) = -0.5 ln(2 pi) - log_scale - 0.5 eps^2, summed over dims
        log_norm = ad.tensor_sum(
            Tensor(-0.5 * LOG_2PI - 0.5 * eps ** 2) - log_scale, axis=1)
        correction = ad.tensor_sum(
            2.0 * (LOG_2 - u - ad.softplus(-2.0 * u)), axis=1)
        log_prob = log_norm - correction
        return action, log_prob

    # -- tape-free paths ------------------------------------------------------

    def _heads_array(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h = self.trunk.forward_array(states)
        mean = np.clip(self.mean_head.forward_array(h),
                       -self.cfg.mean_clamp, self.cfg.mean_clamp)
        log_scale = np.clip(self.log_scale_head.forward_array(h),
                            self.cfg.log_scale_min, self.cfg.log_scale_max)
        return mean, log_scale

    def sample_array(self, states: np.ndarray,
                     eps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Tape-free twin of ``sample`` for rollouts and target computation."""
        mean, log_scale = self._heads_array(states)
        scale = np.exp(log_scale)
        u = mean + scale * eps
        action = np.tanh(u)
        log_norm = np.sum(-0.5 * LOG_2PI - 0.5 * eps ** 2 - log_scale, axis=-1)
        softplus = np.where(u > 0, np.log1p(np.exp(-2.0 * np.abs(u))),
                            -2.0 * u + np.log1p(np.exp(2.0 * u)))
        correction = np.sum(2.0 * (LOG_2 - u - softplus), axis=-1)
        return action, log_norm - correction

    def mean_action(self, state: np.ndarray) -> np.ndarray:
        """Greedy action: tanh of the mean head, no exploration noise."""
        mean, _ = self._heads_array(np.atleast_2d(state))
        return np.tanh(mean[0] if np.asarray(state).ndim == 1 else mean)


class QNet:
    """State-action value network over the concatenated (s, a) input."""

    def __init__(self, cfg: SacConfig, rng: np.random.Generator,
                 obs_dim: int = OBS_DIM, act_dim: int = ACT_DIM,
                 name: str = "q"):
        h1, h2 = cfg.hidden
        self.net = Mlp([obs_dim + act_dim, h1, h2, 1], rng, name=name)

    def parameters(self) -> list[Tensor]:
        return self.net.parameters()

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return self.net.named_parameters()

    def forward(self, states: Tensor, actions: Tensor) -> Tensor:
        return self.net(ad.concat([states, actions], axis=1))

    __call__ = forward

    def forward_array(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return self.net.forward_array(np.concatenate([states, actions], axis=1))[:, 0]

    def clone_target(self, name: str) -> "QNet":
        other = QNet.__new__(QNet)
        other.net = self.net.clone(name)
        return other


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform seeded sampling."""

    def __init__(self, capacity: int, obs_dim: int = OBS_DIM,
                 act_dim: int = ACT_DIM):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self.size = 0
        self.cursor = 0

    def push(self, state, action, reward, next_state, done) -> None:
        i = self.cursor
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        if self.size < batch_size:
            raise ValueError(
                f"buffer holds {self.size} transitions, need {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return {
            "states": self.states[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_states": self.next_states[idx],
            "dones": self.dones[idx],
        }


def target_q(batch: dict, target_q1: QNet, target_q2: QNet, actor: PolicyNet,
             cfg: SacConfig, rng: np.random.Generator) -> np.ndarray:
    """Bootstrap target: r + gamma * (min_i Qbar_i(s', a') - alpha log pi(a'|s')),
    with the bootstrap masked on terminal transitions. No gradients flow."""
    eps = rng.standard_normal(batch["next_states"].shape[:1] + (actor.act_dim,))
    next_actions, log_prob = actor.sample_array(batch["next_states"], eps)
    q_min = np.minimum(target_q1.forward_array(batch["next_states"], next_actions),
                       target_q2.forward_array(batch["next_states"], next_actions))
    bootstrap = q_min - cfg.alpha * log_prob
    return batch["rewards"] + cfg.gamma * (1.0 - batch["dones"]) * bootstrap


def critic_update(q1: QNet, q2: QNet, adam1: Adam, adam2: Adam,
                  batch: dict, q_bar: np.ndarray) -> tuple[float, float]:
    """One Adam step per critic on L = E[1/2 (Q(s,a) - Qbar)^2]."""
    losses = []
    states = Tensor(batch["states"])
    actions = Tensor(batch["actions"])
    target = Tensor(q_bar[:, None])
    for net, adam in ((q1, adam1), (q2, adam2)):
        with Tape() as tape:
            diff = net(states, actions) - target
            loss = ad.tensor_mean(0.5 * diff * diff)
        adam.zero_grad()
        tape.backward(loss)
        adam.step()
        losses.append(float(loss.data))
    return losses[0], losses[1]


def actor_update(actor: PolicyNet, adam: Adam, q1: QNet, q2: QNet,
                 states: np.ndarray, eps: np.ndarray, cfg: SacConfig,
                 cl_term=None, xi4: float = 0.0) -> tuple[float, float]:
    """One Adam step on the actor objective
    E[alpha log pi(a|s) - min_i Q_i(s, a)] (+ xi4 * contrastive loss).

    ``cl_term`` is a callable building the contrastive loss node on the live
    tape; it is only invoked when xi4 is nonzero, so a zero weight leaves the
    update bit-identical to plain SAC. Returns (loss, entropy estimate).
    """
    frozen = q1.parameters() + q2.parameters()
    with Tape() as tape:
        action, log_prob = actor.sample(Tensor(states), eps)
        with freeze(frozen):
            q_min = ad.minimum(q1(Tensor(states), action),
                               q2(Tensor(states), action))
        base = ad.tensor_mean(cfg.alpha * log_prob - ad.tensor_sum(q_min, axis=1))
        if cl_term is not None and xi4 != 0.0:
            loss = base + xi4 * cl_term()
        else:
            loss = base
    adam.zero_grad()
    tape.backward(loss)
    adam.step()
    entropy_estimate = float(np.mean(-log_prob.data))
    return float(loss.data), entropy_estimate
