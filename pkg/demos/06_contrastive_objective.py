"""
Cross-modal contrastive objective
=================================

Texture and motion views of the same clip should embed close together;
views of different clips should not. For anchor i the positive is the other
modality's row i; the denominator collects the anchor's other-modality
negatives plus all same-index column terms. The training loss blends this
with cross-entropy: (1 - alpha) * contrastive + alpha * cross-entropy.
"""

import numpy as np

from msmmt import contrastive_loss, cosine_sim, cross_entropy, total_loss
from msmmt.autodiff import Tensor

rng = np.random.default_rng(0)

# Perfectly aligned modalities: each pair identical, pairs mutually distant
aligned = rng.normal(size=(4, 16))
loss_aligned = contrastive_loss(aligned, aligned.copy(), temperature=0.1)
print(f"aligned pairs   : {loss_aligned.item():.4f}")

# Misaligned: the positive pair is no closer than any negative
shuffled = aligned[rng.permutation(4)]
loss_shuffled = contrastive_loss(aligned, shuffled, temperature=0.1)
print(f"shuffled pairs  : {loss_shuffled.item():.4f}")

# A batch of one has no negatives: the loss is exactly zero
print(f"single-pair loss: {contrastive_loss(aligned[:1], aligned[:1], 0.1).item():.4f}")

# Cosine similarity is the pairing measure; it ignores feature magnitude
a, b = rng.normal(size=8), rng.normal(size=8)
print(f"cos(a, b) = {cosine_sim(a, b):.4f}, cos(3a, b) = {cosine_sim(3 * a, b):.4f}")

# The blended objective at the default weighting
logits = Tensor(rng.normal(size=(4, 3)), requires_grad=True, dtype=np.float64)
labels = np.array([0, 1, 2, 0])
ce = cross_entropy(logits, labels)
con = contrastive_loss(aligned, aligned.copy(), 0.1)
blend = total_loss(ce, con, alpha=0.1)
print(f"cross-entropy {ce.item():.4f}, contrastive {con.item():.4f}, "
      f"blended (alpha=0.1) {blend.item():.4f}")
blend.backward()
print("gradient flows to the logits:", logits.grad.shape)
