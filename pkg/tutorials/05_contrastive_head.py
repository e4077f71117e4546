"""The projection head and its contrastive loss.

Expert and actor actions at the same expert states are embedded into a
128-dimensional latent space; a batch softmax over positive-pair cosine
similarities pulls the actor's representation toward the expert's. Two
denominator conventions exist: the default sums the positive-pair
similarities only, 'standard' is the usual cross-pair InfoNCE.
"""
import numpy as np

from grasprl.autodiff import Tape, Tensor
from grasprl.contrastive import (ClConfig, ProjectionHead, contrastive_loss,
                                 contrastive_loss_brute)

rng = np.random.default_rng(0)
cfg = ClConfig()
head = ProjectionHead(cfg, rng)
print("head topology:", head.net.sizes)

states = rng.standard_normal((8, 20))
expert_actions = rng.uniform(-1, 1, (8, 8))
actor_actions = np.clip(expert_actions + 0.3 * rng.standard_normal((8, 8)),
                        -1, 1)

h_expert = head.embed_array(states, expert_actions)
h_actor = head.embed_array(states, actor_actions)
for mode in ("paper", "standard"):
    with Tape():
        loss = contrastive_loss(Tensor(h_expert), Tensor(h_actor),
                                cfg.tau_cl, mode)
    brute = contrastive_loss_brute(h_expert, h_actor, cfg.tau_cl, mode)
    print(f"{mode:>8} mode: loss {float(loss.data):.6f} "
          f"(brute force {brute:.6f})")

# Identical embeddings make every positive pair perfect: the loss is ln B.
with Tape():
    tied = contrastive_loss(Tensor(h_expert), Tensor(h_expert), cfg.tau_cl)
print("identical embeddings:", float(tied.data), "= ln 8 =", np.log(8))

# Cosine similarity ignores magnitude, so the loss is scale-invariant.
with Tape():
    scaled = contrastive_loss(Tensor(h_expert * 100), Tensor(h_actor * 0.01),
                              cfg.tau_cl)
with Tape():
    plain = contrastive_loss(Tensor(h_expert), Tensor(h_actor), cfg.tau_cl)
print("scale invariance gap:", abs(float(scaled.data) - float(plain.data)))
