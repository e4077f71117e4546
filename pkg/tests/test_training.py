"""Harness behavior on miniature runs: determinism, method flags, metrics,
checkpoints, the ablation switch, and the ablation report."""
from __future__ import annotations

import json
import os

import numpy as np
import pytest

from grasprl.bc import BcConfig
from grasprl.contrastive import ClConfig
from grasprl.demos import DemoSet
from grasprl.expert import collect_demos
from grasprl.nn import load_checkpoint
from grasprl.sac import SacConfig
from grasprl.training import (RunConfig, RunConfigError, ablation,
                              evaluate_checkpoint, load_actor, train)

pytestmark = pytest.mark.filterwarnings("ignore::DeprecationWarning")


@pytest.fixture(scope="module")
def demo_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("demos") / "demos_ball.jsonl"
    DemoSet(collect_demos(4, "ball", noise_scale=0.05, seed=0)).save(path)
    return str(path)


def tiny_cfg(out, method="sac", demo_path=None, **overrides):
    kwargs = dict(
        task="ball", seed=3, method=method, total_iterations=2,
        steps_per_iteration=150, eval_episodes=4, demo_path=demo_path,
        output_dir=str(out),
        sac=SacConfig(hidden=(24, 24), batch_size=32, warmup_steps=50,
                      updates_per_env_step=0.1),
        bc=BcConfig(epochs=30, target_mse=1e-6),
        cl=ClConfig(hidden=(24, 24)))
    kwargs.update(overrides)
    return RunConfig(**kwargs)


def read_metrics(run_dir):
    with open(os.path.join(run_dir, "metrics.csv")) as f:
        header = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    return header, rows


class TestTrainRuns:
    def test_sac_run_reproducible_byte_for_byte(self, tmp_path):
        r1 = train(tiny_cfg(tmp_path / "a"))
        r2 = train(tiny_cfg(tmp_path / "b"))
        csv_a = (tmp_path / "a" / "metrics.csv").read_bytes()
        csv_b = (tmp_path / "b" / "metrics.csv").read_bytes()
        assert csv_a == csv_b
        ck_a, _ = load_checkpoint(r1.final_checkpoint)
        ck_b, _ = load_checkpoint(r2.final_checkpoint)
        for k in ck_a:
            assert ck_a[k].tobytes() == ck_b[k].tobytes()

    def test_metrics_columns_and_monotonicity(self, tmp_path):
        train(tiny_cfg(tmp_path / "run"))
        header, rows = read_metrics(tmp_path / "run")
        assert header == ["iter", "env_steps", "mean_reward", "success_rate",
                          "l_q1", "l_q2", "l_pi", "l_cl", "entropy_estimate"]
        iters = [int(r[0]) for r in rows]
        steps = [int(r[1]) for r in rows]
        assert iters == sorted(iters) and len(set(iters)) == len(iters)
        assert steps == sorted(steps) and len(set(steps)) == len(steps)
        for r in rows:
            assert 0.0 <= float(r[3]) <= 1.0
            assert np.isfinite(float(r[2]))

    def test_bc_method_requires_demo_file(self, tmp_path):
        with pytest.raises(RunConfigError, match="demonstration file"):
            train(tiny_cfg(tmp_path / "x", method="bc_sac",
                           demo_path=str(tmp_path / "missing.jsonl")))

    def test_sac_run_has_no_bc_checkpoint_and_no_head(self, tmp_path):
        result = train(tiny_cfg(tmp_path / "run"))
        assert not os.path.exists(tmp_path / "run" / "checkpoint_bc.ckpt")
        arrays, meta = load_checkpoint(result.final_checkpoint)
        assert meta["has_head"] is False
        assert not any("projection_head" in k for k in arrays)

    def test_bc_sac_run_has_bc_checkpoint_but_no_head(self, tmp_path,
                                                      demo_file):
        result = train(tiny_cfg(tmp_path / "run", method="bc_sac",
                                demo_path=demo_file))
        assert os.path.exists(tmp_path / "run" / "checkpoint_bc.ckpt")
        arrays, meta = load_checkpoint(result.final_checkpoint)
        assert meta["has_head"] is False
        assert not any("projection_head" in k for k in arrays)

    def test_cl_run_head_in_final_but_not_deploy(self, tmp_path, demo_file):
        result = train(tiny_cfg(tmp_path / "run", method="bc_sac_cl",
                                demo_path=demo_file))
        arrays, meta = load_checkpoint(result.final_checkpoint)
        assert meta["has_head"] is True
        assert any("projection_head" in k for k in arrays)
        assert all(name in arrays for name in meta["discardable"])
        deploy, meta_d = load_checkpoint(result.deployment_checkpoint)
        assert meta_d["has_head"] is False
        assert not any("projection_head" in k for k in deploy)
        assert not any(k.startswith("adam/") for k in deploy)

    def test_zero_iterations_is_pure_bc_eval(self, tmp_path, demo_file):
        cfg = tiny_cfg(tmp_path / "run", method="bc_sac", demo_path=demo_file,
                       total_iterations=0)
        result = train(cfg)
        assert len(result.metrics) == 1
        assert result.metrics[0].iter == 0
        assert result.metrics[0].env_steps == 0

    def test_report_written(self, tmp_path):
        train(tiny_cfg(tmp_path / "run"))
        with open(tmp_path / "run" / "report.json") as f:
            report = json.load(f)
        assert "final_success_rate" in report
        assert report["config"]["method"] == "sac"
        assert len(report["per_iteration_wall_seconds"]) == 3


class TestAblationSwitch:
    def test_xi4_zero_matches_bc_sac_bitwise(self, tmp_path, demo_file):
        cfg_plain = tiny_cfg(tmp_path / "plain", method="bc_sac",
                             demo_path=demo_file,
                             checkpoint_every_iteration=True)
        cfg_zero = tiny_cfg(tmp_path / "zero", method="bc_sac_cl",
                            demo_path=demo_file,
                            checkpoint_every_iteration=True,
                            cl=ClConfig(hidden=(24, 24), xi4=0.0))
        train(cfg_plain)
        train(cfg_zero)
        shared_prefixes = ("actor/", "q1", "q2", "adam/actor", "adam/q1",
                           "adam/q2")
        for it in (1, 2):
            a, _ = load_checkpoint(
                tmp_path / "plain" / f"checkpoint_iter{it:04d}.ckpt")
            b, _ = load_checkpoint(
                tmp_path / "zero" / f"checkpoint_iter{it:04d}.ckpt")
            for k in a:
                if k.startswith(shared_prefixes):
                    assert a[k].tobytes() == b[k].tobytes(), f"iter {it}: {k}"

    def test_nonzero_xi4_changes_actor(self, tmp_path, demo_file):
        cfg_plain = tiny_cfg(tmp_path / "plain", method="bc_sac",
                             demo_path=demo_file)
        cfg_cl = tiny_cfg(tmp_path / "cl", method="bc_sac_cl",
                          demo_path=demo_file,
                          cl=ClConfig(hidden=(24, 24), xi4=0.5))
        ra = train(cfg_plain)
        rb = train(cfg_cl)
        a, _ = load_checkpoint(ra.final_checkpoint)
        b, _ = load_checkpoint(rb.final_checkpoint)
        actor_keys = [k for k in a if k.startswith("actor/")]
        assert any(a[k].tobytes() != b[k].tobytes() for k in actor_keys)


class TestEvaluate:
    def test_evaluate_checkpoint_round_trip(self, tmp_path):
        result = train(tiny_cfg(tmp_path / "run"))
        mean_reward, success, episodes = evaluate_checkpoint(
            result.deployment_checkpoint, "ball", n_episodes=3, seed=0)
        assert len(episodes) == 3
        assert np.isfinite(mean_reward)
        assert 0.0 <= success <= 1.0

    def test_zero_episodes_rejected(self, tmp_path):
        result = train(tiny_cfg(tmp_path / "run"))
        with pytest.raises(RunConfigError, match="positive"):
            evaluate_checkpoint(result.deployment_checkpoint, "ball", 0, 0)

    def test_trace_file_schema(self, tmp_path):
        result = train(tiny_cfg(tmp_path / "run"))
        trace = tmp_path / "trace.jsonl"
        evaluate_checkpoint(result.deployment_checkpoint, "ball", 2, 0,
                            trace_path=trace)
        lines = trace.read_text().splitlines()
        assert lines
        rec = json.loads(lines[0])
        assert set(rec) >= {"t", "obs", "action", "reward_breakdown", "event",
                            "done"}
        assert len(rec["obs"]) == 20
        assert len(rec["action"]) == 8
        bd = rec["reward_breakdown"]
        assert bd["total"] == pytest.approx(
            bd["distance"] + bd["smooth"] + bd["event"] + bd["pose"])

    def test_load_actor_validates_shapes(self, tmp_path):
        result = train(tiny_cfg(tmp_path / "run"))
        arrays, meta = load_checkpoint(result.deployment_checkpoint)
        meta["hidden"] = [8, 8]
        from grasprl.nn import save_checkpoint
        bad = tmp_path / "bad.ckpt"
        save_checkpoint(bad, arrays, meta)
        with pytest.raises(RunConfigError, match="shape"):
            load_actor(bad)


class TestAblationRunner:
    def test_single_seed_report_with_warning(self, tmp_path, demo_file):
        cfg = tiny_cfg(tmp_path / "abl", demo_path=demo_file)
        report = ablation(cfg, seeds=[5], methods=("sac", "bc_sac"))
        assert any("small-sample" in w for w in report["warnings"])
        assert set(report["summary"]) == {"sac", "bc_sac"}
        assert os.path.exists(tmp_path / "abl" / "ablation_report.json")
        assert os.path.exists(tmp_path / "abl" / "curves.png")
        assert os.path.exists(tmp_path / "abl" / "curves.csv")

    def test_failed_run_noted_in_partial_report(self, tmp_path):
        # bc_sac with a missing demo file fails; sac still completes
        cfg = tiny_cfg(tmp_path / "abl", demo_path=str(tmp_path / "nope.jsonl"))
        report = ablation(cfg, seeds=[1], methods=("sac", "bc_sac"))
        assert report["failures"]
        assert "bc_sac" in report["failures"][0]
        assert report["summary"]["sac"]["median_final_success"] is not None
        assert report["summary"]["bc_sac"]["median_final_success"] is None

    def test_run_config_json_round_trip(self, tmp_path, demo_file):
        cfg = tiny_cfg(tmp_path / "x", method="bc_sac_cl", demo_path=demo_file)
        blob = json.dumps(cfg.to_dict())
        restored = RunConfig.from_dict(json.loads(blob))
        assert restored.to_dict() == cfg.to_dict()
        assert restored.sac.hidden == cfg.sac.hidden
        assert restored.cl.xi4 == cfg.cl.xi4

    def test_invalid_method_rejected(self):
        with pytest.raises(RunConfigError, match="method"):
            RunConfig(method="ppo")
