"""Command-line entry points.

    grasprl collect  --task ball --n 15 --noise 0.05 --out demos.jsonl
    grasprl pretrain --demos demos.jsonl --config run.json --out actor.ckpt
    grasprl train    --config run.json --method bc_sac_cl
    grasprl eval     --checkpoint run/checkpoint_deploy.ckpt --episodes 100
    grasprl ablate   --config run.json --seeds 1,2,3,4,5
    grasprl serve    --port 8765 --task ball
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np


def _cmd_collect(args) -> int:
    from .demos import DemoSet
    from .expert import collect_demos

    trajectories = collect_demos(args.n, args.task, args.noise, args.seed)
    DemoSet(trajectories).save(args.out)
    lengths = [len(t.steps) for t in trajectories]
    print(f"wrote {len(trajectories)} trajectories "
          f"({sum(lengths)} steps, mean length {np.mean(lengths):.1f}) "
          f"to {args.out}")
    return 0


def _cmd_pretrain(args) -> int:
    from .bc import pretrain
    from .demos import DemoSet
    from .nn import save_checkpoint
    from .sac import PolicyNet
    from .training import RunConfig

    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    demos = DemoSet.load(args.demos)
    rngs = np.random.SeedSequence(cfg.seed).spawn(2)
    actor = PolicyNet(cfg.sac, np.random.default_rng(rngs[0]))
    result = pretrain(actor, demos, cfg.bc, np.random.default_rng(rngs[1]))
    arrays = {name: t.data for name, t in actor.named_parameters()}
    meta = {"phase": "bc", "task": cfg.task, "seed": cfg.seed,
            "hidden": list(cfg.sac.hidden), "has_head": False,
            "discardable": [], "epochs_run": result.epochs_run,
            "final_loss": result.loss_history[-1]}
    save_checkpoint(args.out, arrays, meta)
    print(f"pretrained {result.epochs_run} epochs, "
          f"final loss {result.loss_history[-1]:.3e}, wrote {args.out}")
    return 0


def _cmd_train(args) -> int:
    from .training import RunConfig, train

    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    if args.method:
        cfg = RunConfig.from_dict({**cfg.to_dict(), "method": args.method})
    if args.out:
        cfg = RunConfig.from_dict({**cfg.to_dict(), "output_dir": args.out})
    result = train(cfg)
    last = result.metrics[-1]
    print(f"run complete: {result.run_dir}")
    print(f"final success rate {last.success_rate:.3f}, "
          f"mean reward {last.mean_reward:.2f}")
    return 0


def _cmd_eval(args) -> int:
    from .training import evaluate_checkpoint

    mean_reward, success_rate, episodes = evaluate_checkpoint(
        args.checkpoint, args.task, args.episodes, args.seed,
        trace_path=args.trace)
    print(f"episodes: {len(episodes)}")
    print(f"mean reward: {mean_reward:.2f}")
    print(f"success rate: {success_rate:.3f}")
    if args.trace:
        print(f"trace written to {args.trace}")
    return 0


def _cmd_ablate(args) -> int:
    from .training import RunConfig, ablation

    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    if args.out:
        cfg = RunConfig.from_dict({**cfg.to_dict(), "output_dir": args.out})
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    report = ablation(cfg, seeds)
    for method, row in report["summary"].items():
        print(f"{method}: median final success "
              f"{row['median_final_success']}, median iterations to "
              f"{row['threshold']:.0%} = {row['median_iterations_to_threshold']}")
    for warning in report["warnings"]:
        print(f"warning: {warning}")
    if report["failures"]:
        print("failures:", *report["failures"], sep="\n  ")
    return 0


def _cmd_serve(args) -> int:
    from .teleop import TeleopServer

    server = TeleopServer(args.port, args.task, args.seed, args.out_dir,
                          tick_hz=args.tick_hz,
                          keep_failures=args.keep_failures, host=args.host)
    print(f"teleop server listening on ws://{args.host}:{args.port} "
          f"(task={args.task}, tick={args.tick_hz} Hz); Ctrl-C to stop")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        print("stopped")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grasprl",
        description="Grasping simulator with BC + contrastive SAC training")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="collect scripted expert demonstrations")
    p.add_argument("--task", choices=("ball", "bottle"), default="ball")
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="demos.jsonl")
    p.set_defaults(func=_cmd_collect)

    p = sub.add_parser("pretrain", help="behavior-clone an actor from demos")
    p.add_argument("--demos", required=True)
    p.add_argument("--config", default=None, help="run config JSON")
    p.add_argument("--out", default="actor_bc.ckpt")
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("train", help="run a full training experiment")
    p.add_argument("--config", default=None, help="run config JSON")
    p.add_argument("--method", choices=("sac", "bc_sac", "bc_sac_cl"),
                   default=None)
    p.add_argument("--out", default=None, help="override output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint greedily")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--task", choices=("ball", "bottle"), default="ball")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", default=None, help="write per-step trace JSONL")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="run the three-method comparison")
    p.add_argument("--config", default=None, help="run config JSON")
    p.add_argument("--seeds", default="1,2,3,4,5")
    p.add_argument("--out", default=None, help="override output directory")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("serve", help="serve the teleoperation endpoint")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--task", choices=("ball", "bottle"), default="ball")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--tick-hz", type=float, default=20.0)
    p.add_argument("--out-dir", default="teleop_demos")
    p.add_argument("--keep-failures", action="store_true")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
