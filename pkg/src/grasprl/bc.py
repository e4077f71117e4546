"""Behavior-cloning pretraining: regress the actor's tanh-squashed mean action
onto expert actions with a plain MSE objective (mean squared error per action
component, the usual MSELoss convention).

Only the trunk and mean-head parameters are touched; the log-scale head keeps
its initialization so phase-2 exploration variance is preserved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .demos import DemoSet
from .nn import Adam, GradientNaNError
from .sac import PolicyNet


class BcDivergedError(FloatingPointError):
    """The cloning loss went non-finite."""


@dataclass
class BcConfig:
    epochs: int = 200
    batch_size: int = 512
    lr: float = 7.3e-4
    target_mse: float = 1e-3
    holdout_fraction: float = 0.1

    def __post_init__(self):
        if min(self.epochs, self.batch_size) <= 0 or self.lr <= 0 \
                or self.target_mse <= 0:
            raise ValueError("BcConfig values must be positive")


@dataclass
class BcResult:
    loss_history: list[float]        # mean train loss per epoch
    holdout_history: list[float]     # mean held-out loss per epoch
    epochs_run: int
    converged: bool


def _mean_action_loss_array(actor: PolicyNet, states: np.ndarray,
                            actions: np.ndarray) -> float:
    pred = np.tanh(actor.mean_head.forward_array(
        actor.trunk.forward_array(states)))
    return float(np.mean((pred - actions) ** 2))


def pretrain(actor: PolicyNet, demos: DemoSet, cfg: BcConfig,
             rng: np.random.Generator) -> BcResult:
    """Fit the deterministic head of ``actor`` to the demo pairs.

    Stops early once the epoch train loss drops below ``target_mse``. The
    held-out split never contributes gradients; it guards against silent
    memorization bugs.
    """
    n = demos.num_pairs
    if n == 0:
        raise ValueError("cannot pretrain on an empty demo set")
    perm = rng.permutation(n)
    n_hold = int(round(n * cfg.holdout_fraction))
    hold_idx = perm[:n_hold]
    train_idx = perm[n_hold:]
    states, actions = demos.states, demos.actions

    params = actor.trunk.parameters() + actor.mean_head.parameters()
    adam = Adam(params, lr=cfg.lr)

    loss_history: list[float] = []
    holdout_history: list[float] = []
    converged = False
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_idx))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = train_idx[order[start:start + cfg.batch_size]]
            with Tape() as tape:
                h = actor.trunk(Tensor(states[idx]))
                pred = ad.tanh(actor.mean_head(h))
                diff = pred - Tensor(actions[idx])
                loss = ad.tensor_mean(diff * diff)
            if not np.isfinite(loss.data):
                raise BcDivergedError(
                    f"non-finite cloning loss at epoch {epoch}, "
                    f"batch {start // cfg.batch_size}")
            adam.zero_grad()
            tape.backward(loss)
            try:
                adam.step()
            except GradientNaNError as e:
                raise BcDivergedError(
                    f"non-finite gradient at epoch {epoch}, "
                    f"batch {start // cfg.batch_size}: {e}") from e
            epoch_losses.append(float(loss.data))
        loss_history.append(float(np.mean(epoch_losses)))
        if n_hold:
            holdout_history.append(_mean_action_loss_array(
                actor, states[hold_idx], actions[hold_idx]))
        if loss_history[-1] < cfg.target_mse:
            converged = True
            break
    return BcResult(loss_history=loss_history, holdout_history=holdout_history,
                    epochs_run=len(loss_history), converged=converged)
