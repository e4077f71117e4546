"""A miniature end-to-end training run (a few minutes on a laptop).

The full pipeline: collect demonstrations, behavior-clone the actor, then run
soft actor-critic with the contrastive projection head. The run directory
gets a metrics CSV, checkpoints (including the head-free deployment
checkpoint), and a report.

For the real desk-scale experiment use the CLI:
    grasprl collect --task ball --n 15 --noise 0.05 --out demos.jsonl
    grasprl train --config run.json --method bc_sac_cl
    grasprl ablate --config run.json --seeds 1,2,3,4,5
"""
import os

from grasprl.bc import BcConfig
from grasprl.contrastive import ClConfig
from grasprl.demos import DemoSet
from grasprl.expert import collect_demos
from grasprl.sac import SacConfig
from grasprl.training import RunConfig, evaluate_checkpoint, train

demo_path = "demos_ball.jsonl"
if not os.path.exists(demo_path):
    DemoSet(collect_demos(15, "ball", noise_scale=0.05, seed=0)).save(demo_path)

cfg = RunConfig(
    task="ball",
    seed=1,
    method="bc_sac_cl",
    total_iterations=3,
    steps_per_iteration=500,
    eval_episodes=20,
    demo_path=demo_path,
    output_dir="runs/mini_bc_sac_cl",
    sac=SacConfig(hidden=(64, 64), batch_size=128, warmup_steps=200,
                  updates_per_env_step=0.25, log_scale_init=-2.0,
                  pretrain_updates=500),
    bc=BcConfig(epochs=1500, target_mse=5e-4),
    cl=ClConfig(hidden=(64, 64)),
)
result = train(cfg)
for m in result.metrics:
    print(f"iteration {m.iter}: success {m.success_rate:.2f}, "
          f"mean reward {m.mean_reward:8.1f}")

mean_reward, success, _ = evaluate_checkpoint(
    result.deployment_checkpoint, "ball", n_episodes=20, seed=99)
print(f"deployment checkpoint (head removed): success {success:.2f}, "
      f"reward {mean_reward:.1f}")
