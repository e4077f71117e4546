"""Phase 1: behavior-cloning pretraining.

The actor's tanh-squashed mean action is regressed onto expert actions with a
plain MSE. Only the trunk and mean head move; the exploration-scale head is
untouched so phase 2 keeps its configured exploration noise.

Takes a couple of minutes: it collects 15 demos and fits the default
2x256 network.
"""
import numpy as np

from grasprl.bc import BcConfig, pretrain
from grasprl.demos import DemoSet
from grasprl.env import GraspEnv
from grasprl.expert import collect_demos
from grasprl.sac import PolicyNet, SacConfig

demos = DemoSet(collect_demos(15, "ball", noise_scale=0.05, seed=0))
print("training pairs:", demos.num_pairs)

actor = PolicyNet(SacConfig(), np.random.default_rng(42))
result = pretrain(actor, demos, BcConfig(epochs=4000, target_mse=5e-4),
                  np.random.default_rng(7))
print(f"ran {result.epochs_run} epochs, train loss "
      f"{result.loss_history[-1]:.2e}, held-out loss "
      f"{result.holdout_history[-1]:.2e}")

# Greedy evaluation on unseen scenes: the cloned policy grasps roughly half
# the time before any reinforcement learning.
successes = 0
n = 50
for ep in range(n):
    env = GraspEnv("ball")
    _, obs = env.reset(10_000 + ep)
    done = False
    while not done:
        state, obs, _, done = env.step(actor.mean_action(obs))
    successes += state.terminal_event == "success"
print(f"greedy success on {n} unseen scenes: {successes / n:.0%}")
