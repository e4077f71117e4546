"""Collecting expert demonstrations with the scripted grasper.

The expert is a damped-least-squares servo over raw observations: approach a
hover point above the object, align the hand normal and aperture, then cross
the contact shell in a single box-constrained step. Failed attempts are
discarded, so every stored trajectory ends in a success event.
"""
import numpy as np

from grasprl.demos import DemoSet, sample_expert_batch
from grasprl.expert import collect_demos, scripted_expert

# One deterministic trajectory (no action noise).
traj = scripted_expert(env_seed=0, task="ball", noise_scale=0.0)
print(f"seed-0 trajectory: {len(traj.steps)} steps, "
      f"ends in {traj.steps[-1].event!r}")

# The standard demo budget: 15 noisy trajectories per task.
trajectories = collect_demos(15, "ball", noise_scale=0.05, seed=0)
lengths = [len(t.steps) for t in trajectories]
print(f"15 demos: all succeed = {all(t.succeeded for t in trajectories)}, "
      f"mean length {np.mean(lengths):.1f}, total pairs {sum(lengths)}")

demos = DemoSet(trajectories)
demos.save("demos_ball.jsonl")
reloaded = DemoSet.load("demos_ball.jsonl")
print("saved and reloaded:", len(reloaded), "trajectories,",
      reloaded.num_pairs, "state-action pairs")

# Batches are drawn uniformly over all pairs, with replacement.
states, actions = sample_expert_batch(reloaded, batch_size=512, seed=1)
print("sampled batch:", states.shape, actions.shape)
print("action ranges:", np.round(actions.min(axis=0), 2), "to",
      np.round(actions.max(axis=0), 2))
