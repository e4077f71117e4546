"""Projection head and contrastive loss against the brute-force oracle."""
from __future__ import annotations

import numpy as np
import pytest

from grasprl import autodiff as ad
from grasprl.autodiff import Tape, Tensor
from grasprl.contrastive import (ClConfig, EmbeddingCollapseError,
                                 ProjectionHead, contrastive_loss,
                                 contrastive_loss_brute, head_update)
from grasprl.nn import Adam
from grasprl.sac import PolicyNet, SacConfig

CL_CFG = ClConfig(hidden=(16, 16))


def loss_value(h_e, h_a, tau, mode):
    with Tape():
        return float(contrastive_loss(Tensor(h_e), Tensor(h_a), tau, mode).data)


class TestLossValues:
    def test_single_pair_is_zero_in_paper_mode(self):
        rng = np.random.default_rng(0)
        h = rng.standard_normal((1, 16))
        assert loss_value(h, rng.standard_normal((1, 16)), 0.1,
                          "paper") == pytest.approx(0.0, abs=1e-12)

    def test_equal_similarities_give_log_b(self):
        for mode in ("paper", "standard"):
            for b in (2, 8, 64):
                h = np.tile(np.eye(1, 16), (b, 1))  # identical rows
                val = loss_value(h, h.copy(), 0.1, mode)
                assert val == pytest.approx(np.log(b), rel=1e-10)

    def test_spec_two_pair_value(self):
        # similarities 1.0 and 0.5 at tau 0.1: loss = LSE(10,5) - 7.5
        e = np.array([[1.0, 0.0], [1.0, 0.0]])
        a = np.array([[1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        expected = np.log(np.exp(10) + np.exp(5)) - 7.5
        assert loss_value(e, a, 0.1, "paper") == pytest.approx(expected,
                                                               rel=1e-12)
        assert expected == pytest.approx(2.5067153, abs=1e-6)

    def test_matches_brute_force_on_random_batches(self):
        rng = np.random.default_rng(1)
        for mode in ("paper", "standard"):
            for b in (1, 2, 8, 64):
                for _ in (0, 1):
                    h_e = rng.standard_normal((b, 32))
                    h_a = rng.standard_normal((b, 32))
                    fast = loss_value(h_e, h_a, 0.1, mode)
                    brute = contrastive_loss_brute(h_e, h_a, 0.1, mode)
                    assert fast == pytest.approx(brute, abs=1e-10)

    def test_positive_scaling_invariance(self):
        rng = np.random.default_rng(2)
        h_e = rng.standard_normal((16, 32))
        h_a = rng.standard_normal((16, 32))
        base = loss_value(h_e, h_a, 0.1, "paper")
        scaled = loss_value(h_e * 37.5, h_a * 0.003, 0.1, "paper")
        assert scaled == pytest.approx(base, abs=1e-10)

    def test_zero_norm_row_is_an_error_naming_the_row(self):
        rng = np.random.default_rng(3)
        h_e = rng.standard_normal((4, 8))
        h_a = rng.standard_normal((4, 8))
        h_a[2] = 0.0
        with pytest.raises(EmbeddingCollapseError, match="actor.*row 2"):
            loss_value(h_e, h_a, 0.1, "paper")

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(4)
        for mode in ("paper", "standard"):
            h_e = Tensor(rng.standard_normal((6, 12)), requires_grad=True)
            h_a_data = rng.standard_normal((6, 12))

            def build():
                with Tape() as tape:
                    loss = contrastive_loss(h_e, Tensor(h_a_data), 0.1, mode)
                return tape, loss

            tape, loss = build()
            h_e.zero_grad()
            tape.backward(loss)
            analytic = h_e.grad.copy()
            h = 1e-6
            numeric = np.zeros_like(h_e.data)
            it = np.nditer(h_e.data, flags=["multi_index"])
            while not it.finished:
                i = it.multi_index
                old = h_e.data[i]
                h_e.data[i] = old + h
                up = float(build()[1].data)
                h_e.data[i] = old - h
                down = float(build()[1].data)
                h_e.data[i] = old
                numeric[i] = (up - down) / (2 * h)
                it.iternext()
            rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-7)
            assert rel.max() < 1e-4


class TestProjectionHead:
    def test_output_feature_size_128(self):
        head = ProjectionHead(ClConfig(), np.random.default_rng(0))
        assert head.net.out_dim == 128
        assert head.net.sizes == [28, 256, 256, 128]

    def test_identical_inputs_identical_embeddings(self):
        head = ProjectionHead(CL_CFG, np.random.default_rng(1))
        rng = np.random.default_rng(2)
        s = rng.standard_normal((4, 20))
        a = rng.uniform(-1, 1, (4, 8))
        e1 = head.embed_array(s, a)
        e2 = head.embed_array(s.copy(), a.copy())
        assert np.array_equal(e1, e2)

    def test_batch_shape(self):
        head = ProjectionHead(CL_CFG, np.random.default_rng(3))
        rng = np.random.default_rng(4)
        out = head.embed_array(rng.standard_normal((512, 20)),
                               rng.uniform(-1, 1, (512, 8)))
        assert out.shape == (512, 128)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="tau_cl"):
            ClConfig(tau_cl=0.0)
        with pytest.raises(ValueError, match="denominator_mode"):
            ClConfig(denominator_mode="softmax")


class TestHeadUpdate:
    def _setup(self, seed=0):
        actor = PolicyNet(SacConfig(hidden=(16, 16)),
                          np.random.default_rng(seed), obs_dim=20)
        head = ProjectionHead(CL_CFG, np.random.default_rng(seed + 1),
                              obs_dim=20)
        adam = Adam(head.parameters(), lr=CL_CFG.lr)
        rng = np.random.default_rng(seed + 2)
        states = rng.standard_normal((8, 20))
        expert_actions = rng.uniform(-1, 1, (8, 8))
        eps = rng.standard_normal((8, 8))
        return actor, head, adam, states, expert_actions, eps

    def test_head_update_changes_only_head(self):
        actor, head, adam, s, a_e, eps = self._setup()
        actor_before = [p.data.copy() for p in actor.parameters()]
        head_before = [p.data.copy() for p in head.parameters()]
        head_update(head, adam, actor, s, a_e, eps, CL_CFG)
        assert all(p.data.tobytes() == b.tobytes()
                   for p, b in zip(actor.parameters(), actor_before))
        assert any(p.data.tobytes() != b.tobytes()
                   for p, b in zip(head.parameters(), head_before))

    def test_actor_term_carries_gradient_into_actor_only(self):
        actor, head, adam, s, a_e, eps = self._setup(5)
        _, cl_fn = head_update(head, adam, actor, s, a_e, eps, CL_CFG)
        head_before = [p.data.copy() for p in head.parameters()]
        with Tape() as tape:
            loss = cl_fn()
        for p in actor.parameters() + head.parameters():
            p.zero_grad()
        tape.backward(loss)
        assert any(p.grad is not None and np.any(p.grad != 0)
                   for p in actor.parameters())
        assert all(p.grad is None for p in head.parameters())
        assert all(p.data.tobytes() == b.tobytes()
                   for p, b in zip(head.parameters(), head_before))

    def test_identical_actions_give_log_b_and_small_pull(self):
        # expert and actor actions identical: diagonal similarity 1 for every
        # row, so the loss is ln B and the pull-together gradient is ~0
        actor, head, adam, s, a_e, eps = self._setup(7)
        b = 4
        s, a_e = s[:b], a_e[:b]
        with Tape() as tape:
            h = head.embed(Tensor(s), Tensor(a_e))
            loss = contrastive_loss(h, h, CL_CFG.tau_cl, "paper")
        assert float(loss.data) == pytest.approx(np.log(b), rel=1e-10)
        for p in head.parameters():
            p.zero_grad()
        tape.backward(loss)
        grad_norm = max(np.abs(p.grad).max() for p in head.parameters()
                        if p.grad is not None)
        assert grad_norm < 1e-8

    def test_seeded_update_reproducible(self):
        v1 = []
        for _ in range(2):
            actor, head, adam, s, a_e, eps = self._setup(9)
            val, _ = head_update(head, adam, actor, s, a_e, eps, CL_CFG)
            v1.append(val)
        assert v1[0] == v1[1]
