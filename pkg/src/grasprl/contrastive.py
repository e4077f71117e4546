"""Projection head and contrastive loss pulling the actor's state-action
representations toward expert state-action representations.

The head embeds concatenated (state, action) pairs into a 128-dimensional
latent space. The loss is a batch softmax over cosine similarities of positive
pairs (expert embedding, actor embedding at the same expert state). Two
denominator conventions are supported:

  * ``paper``    - the denominator sums only the B positive-pair similarities
  * ``standard`` - conventional InfoNCE with all cross pairs sim(e_j, a_k)

The head is train-time machinery only; deployment checkpoints drop it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .env import ACT_DIM, OBS_DIM
from .nn import Adam, Mlp, freeze

EMBED_DIM = 128


class EmbeddingCollapseError(FloatingPointError):
    """An embedding row has (numerically) zero norm, usually dead ReLUs."""


@dataclass
class ClConfig:
    tau_cl: float = 0.1
    xi4: float = 0.5
    lr: float = 7.3e-4
    hidden: tuple[int, int] = (256, 256)
    denominator_mode: str = "paper"

    def __post_init__(self):
        if self.tau_cl <= 0:
            raise ValueError(f"tau_cl must be positive, got {self.tau_cl}")
        if self.denominator_mode not in ("paper", "standard"):
            raise ValueError(
                f"denominator_mode must be 'paper' or 'standard', "
                f"got {self.denominator_mode!r}")


class ProjectionHead:
    def __init__(self, cfg: ClConfig, rng: np.random.Generator,
                 obs_dim: int = OBS_DIM, act_dim: int = ACT_DIM,
                 name: str = "projection_head"):
        h1, h2 = cfg.hidden
        self.net = Mlp([obs_dim + act_dim, h1, h2, EMBED_DIM], rng, name=name)

    def parameters(self):
        return self.net.parameters()

    def named_parameters(self):
        return self.net.named_parameters()

    def embed(self, states: Tensor, actions: Tensor) -> Tensor:
        return self.net(ad.concat([states, actions], axis=1))

    def embed_array(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return self.net.forward_array(np.concatenate([states, actions], axis=1))


def _check_norms(h: np.ndarray, label: str) -> None:
    norms = np.linalg.norm(h, axis=1)
    bad = np.flatnonzero(norms < 1e-12)
    if bad.size:
        raise EmbeddingCollapseError(
            f"{label} embedding row {int(bad[0])} has zero norm")


def _normalize_rows(h: Tensor) -> Tensor:
    norm = ad.power(ad.tensor_sum(h * h, axis=1, keepdims=True), 0.5)
    return h / norm


def contrastive_loss(h_expert: Tensor, h_actor: Tensor, tau_cl: float,
                     mode: str = "paper") -> Tensor:
    """Batch softmax over positive-pair cosine similarities.

    paper mode:    L = -1/B sum_j [ s_j/tau - LSE_k(s_k/tau) ],
                   s_k = cos(e_k, a_k)
    standard mode: L = -1/B sum_j [ S_jj/tau - LSE_k(S_jk/tau) ],
                   S_jk = cos(e_j, a_k)
    """
    _check_norms(h_expert.data, "expert")
    _check_norms(h_actor.data, "actor")
    e_hat = _normalize_rows(h_expert)
    a_hat = _normalize_rows(h_actor)
    diag = ad.tensor_sum(e_hat * a_hat, axis=1) * (1.0 / tau_cl)
    if mode == "paper":
        return ad.logsumexp(diag, axis=0) - ad.tensor_mean(diag)
    if mode == "standard":
        sim = ad.matmul(e_hat, ad.transpose(a_hat)) * (1.0 / tau_cl)
        row_lse = ad.logsumexp(sim, axis=1)
        return ad.tensor_mean(row_lse - diag)
    raise ValueError(f"unknown denominator mode {mode!r}")


def contrastive_loss_brute(h_expert: np.ndarray, h_actor: np.ndarray,
                           tau_cl: float, mode: str = "paper") -> float:
    """Independent scalar reference implementation (no shared code paths with
    the tape version beyond numpy primitives)."""
    b = h_expert.shape[0]
    cos = np.empty(b)
    for j in range(b):
        cos[j] = (h_expert[j] @ h_actor[j]
                  / (np.linalg.norm(h_expert[j]) * np.linalg.norm(h_actor[j])))
    total = 0.0
    for j in range(b):
        if mode == "paper":
            denom = sum(np.exp(cos[k] / tau_cl) for k in range(b))
        else:
            denom = 0.0
            for k in range(b):
                c_jk = (h_expert[j] @ h_actor[k]
                        / (np.linalg.norm(h_expert[j])
                           * np.linalg.norm(h_actor[k])))
                denom += np.exp(c_jk / tau_cl)
        total += np.log(np.exp(cos[j] / tau_cl) / denom)
    return float(-total / b)


def head_update(head: ProjectionHead, adam_head: Adam, actor, states: np.ndarray,
                expert_actions: np.ndarray, eps: np.ndarray,
                cfg: ClConfig) -> tuple[float, "callable"]:
    """Algorithm step pair for the contrastive path.

    First the head takes one Adam step on the contrastive loss with the actor
    treated as a constant sampler. The returned closure then rebuilds the loss
    with the updated (frozen) head and the actor live, for use inside the
    actor's own tape so the xi4-weighted term carries gradient into the policy.
    """
    actor_actions, _ = actor.sample_array(states, eps)
    s = Tensor(states)
    with Tape() as tape:
        h_e = head.embed(s, Tensor(expert_actions))
        h_a = head.embed(s, Tensor(actor_actions))
        loss = contrastive_loss(h_e, h_a, cfg.tau_cl, cfg.denominator_mode)
    adam_head.zero_grad()
    tape.backward(loss)
    adam_head.step()

    def actor_term() -> Tensor:
        live_actions, _ = actor.sample(Tensor(states), eps)
        h_e2 = Tensor(head.embed_array(states, expert_actions))
        with freeze(head.parameters()):
            h_a2 = head.embed(Tensor(states), live_actions)
        return contrastive_loss(h_e2, h_a2, cfg.tau_cl, cfg.denominator_mode)

    return float(loss.data), actor_term
