"""Reward structure, event detection, and episode mechanics of the simulator."""
from __future__ import annotations

import json

import numpy as np
import pytest

from grasprl import kinematics as kin
from grasprl.env import (ACT_DIM, COLLISION, CONTACT, SUCCESS, DegenerateActionError,
                         EpisodeDoneError, GraspEnv, OBS_APERTURE, OBS_DIM,
                         OBS_DIST, OBS_HAND, OBS_NORMAL, OBS_OBJECT, OBS_Q,
                         OBS_REL, RewardWeights, SceneConfig, cos_psi,
                         event_reward, pose_reward)
from grasprl.expert import ScriptedExpert

W = RewardWeights()


class TestCosPsi:
    def test_parallel(self):
        assert cos_psi(np.array([0, 0, 1.0]), np.array([0, 0, 2.0]),
                       np.zeros(3)) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cos_psi(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]),
                       np.zeros(3)) == pytest.approx(0.0)

    def test_45_degrees(self):
        n = np.array([1.0, 1.0, 0]) / np.sqrt(2)
        assert cos_psi(n, np.array([1.0, 0, 0]),
                       np.zeros(3)) == pytest.approx(1 / np.sqrt(2))

    def test_coincident_points_return_one(self):
        p = np.array([0.3, 0.2, 0.1])
        assert cos_psi(np.array([0, 1.0, 0]), p, p + 1e-12) == 1.0

    def test_agrees_with_direct_angle_computation(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            n = rng.standard_normal(3)
            n /= np.linalg.norm(n)
            obj = rng.standard_normal(3)
            hand = rng.standard_normal(3)
            if np.linalg.norm(obj - hand) < 1e-6:
                continue
            rel = obj - hand
            direct = np.cos(np.arccos(np.clip(
                np.dot(n, rel) / np.linalg.norm(rel), -1, 1)))
            assert abs(cos_psi(n, obj, hand) - direct) < 1e-12


class TestPoseReward:
    def test_boundary_is_zero_from_both_sides(self):
        assert pose_reward(0.75, W) == 0.0
        assert pose_reward(np.nextafter(0.75, 1), W) == pytest.approx(0.0, abs=1e-12)

    def test_perfect_alignment(self):
        assert pose_reward(1.0, W) == pytest.approx(20.0)

    def test_below_threshold_slope(self):
        assert pose_reward(0.5, W) == pytest.approx(-1.75)


class TestEventReward:
    @pytest.mark.parametrize("event,value", [
        (SUCCESS, 1000.0), (COLLISION, -100.0), (CONTACT, -60.0), (None, 0.0),
    ])
    def test_table_values(self, event, value):
        assert event_reward(event, W) == value


class TestReset:
    def test_same_seed_bit_identical(self):
        env = GraspEnv("ball")
        s1, o1 = env.reset(7)
        q1, obj1, tgt1 = s1.q.copy(), s1.nu_object.copy(), s1.target_obs.copy()
        s2, o2 = env.reset(7)
        assert np.array_equal(q1, s2.q)
        assert np.array_equal(obj1, s2.nu_object)
        assert np.array_equal(tgt1, s2.target_obs)
        assert np.array_equal(o1, o2)

    def test_task_radii(self):
        ball, _ = GraspEnv("ball").reset(0)
        bottle, _ = GraspEnv("bottle").reset(0)
        assert ball.object_radius == 0.035
        assert bottle.object_radius == 0.030

    def test_thousand_resets_reachable(self):
        env = GraspEnv("ball")
        arm = env.scene.arm
        for seed in range(1000):
            state, _ = env.reset(seed)
            assert (np.linalg.norm(state.nu_object - arm.base_position)
                    <= arm.reach)

    def test_observation_layout(self):
        env = GraspEnv("bottle")
        state, obs = env.reset(3)
        assert obs.shape == (OBS_DIM,)
        assert np.array_equal(obs[OBS_Q], state.q)
        assert np.array_equal(obs[OBS_HAND], state.nu_hand)
        assert np.array_equal(obs[OBS_OBJECT], state.nu_object)
        rel = state.nu_object - state.nu_hand
        assert np.allclose(obs[OBS_REL], rel, atol=1e-9)
        assert np.isclose(obs[OBS_DIST], np.linalg.norm(rel), atol=1e-9)
        assert obs[OBS_APERTURE] == state.aperture

    def test_hand_matches_forward_kinematics(self):
        env = GraspEnv("ball")
        state, _ = env.reset(11)
        arm = env.scene.arm
        assert np.array_equal(
            state.nu_hand,
            kin.hand_position(state.q, arm.link_lengths, arm.base_position))
        assert np.isclose(np.linalg.norm(state.n_hand), 1.0, atol=1e-9)


class TestStep:
    def test_zero_action_keeps_state_and_zero_smooth(self):
        env = GraspEnv("ball")
        state, obs0 = env.reset(0)
        q_before = state.q.copy()
        state, obs, breakdown, done = env.step(np.zeros(ACT_DIM))
        assert np.array_equal(state.q, q_before)
        assert breakdown.smooth_term == 0.0
        assert np.array_equal(obs, obs0)

    def test_smoothness_identity(self):
        # engineered prev/new squared distances: 4.0 -> 1.0 gives xi1 * 3
        env = GraspEnv("ball")
        state, _ = env.reset(0)
        state.prev_dist_sq = 4.0
        state.target_obs = np.zeros(OBS_DIM)  # so new dist_sq is |obs|^2
        _, obs, breakdown, _ = env.step(np.zeros(ACT_DIM))
        new_sq = float(np.sum(obs ** 2))
        assert breakdown.smooth_term == pytest.approx(
            W.xi1 * (4.0 - new_sq), rel=1e-12)
        assert breakdown.distance_term == pytest.approx(-new_sq, rel=1e-12)

    def test_decomposition_exact(self):
        env = GraspEnv("ball")
        env.reset(1)
        rng = np.random.default_rng(5)
        done = False
        while not done:
            _, _, b, done = env.step(rng.uniform(-1, 1, ACT_DIM))
            assert b.total == (b.distance_term + b.smooth_term
                               + b.event_term + b.pose_term)

    def test_step_after_done_refuses(self):
        env = GraspEnv("ball")
        env.reset(0)
        done = False
        while not done:
            _, _, _, done = env.step(np.full(ACT_DIM, 0.3))
        with pytest.raises(EpisodeDoneError):
            env.step(np.zeros(ACT_DIM))

    def test_degenerate_action_rejected(self):
        env = GraspEnv("ball")
        env.reset(0)
        bad = np.zeros(ACT_DIM)
        bad[3] = np.nan
        with pytest.raises(DegenerateActionError):
            env.step(bad)
        bad[3] = np.inf
        with pytest.raises(DegenerateActionError):
            env.step(bad)

    def test_episode_cap_100(self):
        env = GraspEnv("ball")
        env.reset(0)
        steps = 0
        done = False
        while not done:
            _, _, _, done = env.step(np.zeros(ACT_DIM))
            steps += 1
        assert steps == 100
        assert env.state.terminal_event is None

    def test_joint_limits_clamped(self):
        env = GraspEnv("ball")
        state, _ = env.reset(0)
        lim = env.scene.arm.joint_limits
        for _ in range(60):
            if state.terminal_event is not None:
                break
            state, _, _, done = env.step(np.ones(ACT_DIM))
            assert np.all(state.q >= lim[:, 0]) and np.all(state.q <= lim[:, 1])
            if done:
                break

    def test_determinism_full_trajectory(self):
        actions = np.random.default_rng(9).uniform(-1, 1, (40, ACT_DIM))
        traces = []
        for _ in range(2):
            env = GraspEnv("bottle")
            env.reset(123)
            rows = []
            for a in actions:
                state, obs, b, done = env.step(a)
                rows.append((obs.tobytes(), b.total))
                if done:
                    break
            traces.append(rows)
        assert traces[0] == traces[1]


class TestEvents:
    def _run_expert(self, task="ball", seed=0):
        env = GraspEnv(task)
        expert = ScriptedExpert(task, env.scene, 0.0, np.random.default_rng(0))
        _, obs = env.reset(seed)
        done = False
        breakdowns = []
        while not done:
            state, obs, b, done = env.step(expert.action(obs))
            breakdowns.append((state.terminal_event, b))
        return env, breakdowns

    def test_success_event_pays_z1(self):
        env, breakdowns = self._run_expert()
        event, b = breakdowns[-1]
        assert event == SUCCESS
        assert b.event_term == 1000.0

    def test_success_predicate_holds_at_success(self):
        env, _ = self._run_expert(seed=5)
        sc = env.scene
        state = env.state
        dist = np.linalg.norm(state.nu_object - state.nu_hand)
        assert dist <= state.object_radius + sc.success_dist_slack
        lo, hi = env.task.aperture_band
        assert lo <= state.aperture <= hi
        c = cos_psi(state.n_hand, state.nu_object, state.nu_hand)
        assert c >= sc.reward.lambda_th

    def test_collision_below_table(self):
        # drive the arm hard downward until some link dips below z=0
        env = GraspEnv("ball")
        env.reset(0)
        action = np.zeros(ACT_DIM)
        action[1] = 1.0
        action[2] = 1.0
        done = False
        event = None
        while not done:
            state, _, b, done = env.step(action)
            event = state.terminal_event
        assert event == COLLISION
        assert b.event_term == -100.0

    def test_contact_without_success(self):
        # creep toward the object with a wide-open aperture: the success
        # predicate cannot fire, so entering the shell must be contact
        env = GraspEnv("ball")
        state, obs = env.reset(0)
        expert = ScriptedExpert("ball", env.scene, 0.0,
                                np.random.default_rng(0))
        done = False
        while not done:
            action = expert.action(obs)
            action[7] = 1.0  # force the gripper open
            state, obs, b, done = env.step(action)
        assert state.terminal_event in (CONTACT, None)
        if state.terminal_event == CONTACT:
            assert b.event_term == -60.0

    def test_event_exclusivity_and_termination(self):
        rng = np.random.default_rng(17)
        for seed in range(30):
            env = GraspEnv("ball")
            env.reset(seed)
            done = False
            events = []
            while not done:
                state, _, _, done = env.step(rng.uniform(-1, 1, ACT_DIM))
                events.append(state.terminal_event)
            terminal = [e for e in events if e is not None]
            assert len(terminal) <= 1
            if terminal:
                assert events[-1] == terminal[0]


class TestSmoothTelescoping:
    def test_smooth_terms_telescope_over_episode(self):
        env = GraspEnv("ball")
        state, obs0 = env.reset(4)
        initial_sq = state.prev_dist_sq
        rng = np.random.default_rng(2)
        total_smooth = 0.0
        done = False
        while not done:
            state, obs, b, done = env.step(rng.uniform(-0.5, 0.5, ACT_DIM))
            total_smooth += b.smooth_term
        final_sq = float(np.sum((obs - state.target_obs) ** 2))
        assert total_smooth / W.xi1 == pytest.approx(initial_sq - final_sq,
                                                     rel=1e-9)


class TestTargetState:
    def test_target_pose_entries(self):
        env = GraspEnv("ball")
        state, _ = env.reset(0)
        tgt = state.target_obs
        grasp = env.grasp_point(state.nu_object)
        assert np.allclose(tgt[OBS_HAND], grasp)
        assert np.allclose(tgt[OBS_NORMAL], [0, 0, -1.0])
        assert np.allclose(tgt[OBS_OBJECT], state.nu_object)
        expected_dist = state.object_radius + env.scene.grip_offset
        assert tgt[OBS_DIST] == pytest.approx(expected_dist)
        assert tgt[OBS_APERTURE] == env.task.grasp_aperture

    def test_ik_joint_entries_reach_grasp_point(self):
        env = GraspEnv("ball")
        state, _ = env.reset(0)
        arm = env.scene.arm
        hand = kin.hand_position(state.target_obs[OBS_Q], arm.link_lengths,
                                 arm.base_position)
        assert np.linalg.norm(hand - env.grasp_point(state.nu_object)) < 1e-3

    def test_distance_term_never_positive(self):
        env = GraspEnv("bottle")
        env.reset(9)
        rng = np.random.default_rng(3)
        done = False
        while not done:
            _, _, b, done = env.step(rng.uniform(-1, 1, ACT_DIM))
            assert b.distance_term <= 0.0


class TestSceneConfig:
    def test_json_round_trip(self):
        scene = SceneConfig()
        blob = json.dumps(scene.to_dict())
        restored = SceneConfig.from_dict(json.loads(blob))
        assert np.array_equal(restored.arm.link_lengths,
                              scene.arm.link_lengths)
        assert np.array_equal(restored.arm.joint_limits,
                              scene.arm.joint_limits)
        assert restored.reward == scene.reward
        assert restored.grip_offset == scene.grip_offset

    def test_reward_weights_are_table_defaults(self):
        w = RewardWeights()
        assert (w.xi1, w.xi2, w.xi3) == (1000.0, 1.0, 1.0)
        assert (w.z1, w.z2, w.z3, w.z4, w.z5) == (1000.0, 100.0, 60.0, 7.0, 80.0)
        assert w.lambda_th == 0.75

    def test_unknown_task_rejected(self):
        with pytest.raises(ValueError, match="unknown task"):
            GraspEnv("cube")
