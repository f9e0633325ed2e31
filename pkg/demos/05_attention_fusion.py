"""
Attention-weighted patch selection
==================================

The transformer records every head's attention matrix for the first L-1
layers. Head-averaged and row-normalized, these multiply across depth into
a single matrix whose column means (cls column dropped, max scaled to 1)
score each patch's importance. The last encoder layer then runs on
importance-weighted tokens, letting informative patches dominate without
discarding the rest.
"""

import numpy as np

from msmmt import MicroExpressionModel, ModelConfig
from msmmt.model import attention_rollup, layer_attention_normalize, patch_importance

cfg = ModelConfig(image_size=64, scales=(1, 2), layers=4, heads=4, embed_dim=64)
model = MicroExpressionModel(cfg, seed=0)

# An input whose bottom-right quadrant carries all the structure
rng = np.random.default_rng(1)
img = np.full((64, 64, 3), 0.5, dtype=np.float32)
img[32:, 32:] = rng.random((32, 32, 3))

tokens = model.patch_embed(img[None], "flowos", 0)
z, stack = model.encoder_forward(tokens, "flowos")
print(f"recorded {len(stack)} layers x {cfg.heads} heads of attention")

normed = layer_attention_normalize(stack[0])
print("row means after normalization (should be 1):",
      np.round(normed.data.mean(axis=-1)[0, :4], 6))

rolled = attention_rollup(stack)
importance = patch_importance(rolled)
grid = importance.data[0].reshape(4, 4)
print("patch importance grid (max is exactly 1):")
print(np.round(grid, 3))
print(f"most important patch: {np.unravel_index(grid.argmax(), grid.shape)}")

# The fused last layer turns the weighted tokens into the scale feature
feature = model.weighted_last_layer(z, importance, "flowos")
print("per-scale representation:", feature.shape)

# Both modality features concatenated over scales feed the classifier
feat = model.modality_feature(img[None], "flowos")
print("modality feature (scales concatenated):", feat.shape)
