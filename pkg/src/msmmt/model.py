"""Multi-scale, two-modality transformer with attention-weighted patch fusion.

Each modality image (dynamic image / flow-strain image) is resized to a set
of scales, patch-embedded with a shared projection, and run through a
pre-norm transformer encoder shared across that modality's scales (per-scale
positional embeddings). The per-head attention matrices of the first L-1
layers are head-averaged, row-mean normalized, multiplied across depth, and
reduced to a per-patch importance vector that reweights the last layer's
input tokens. The per-scale cls outputs are concatenated into the modality
feature; the two modality features feed a two-layer classifier head.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor, concat, dropout, layernorm, softmax
from .imageops import bilinear_resize
from .tensorio import read_tensor, write_tensor

__all__ = [
    "ModelConfig",
    "MicroExpressionModel",
    "multiscale_views",
    "patchify",
    "layer_attention_normalize",
    "attention_rollup",
    "patch_importance",
    "save_checkpoint",
    "load_checkpoint",
]

MODALITIES = ("dy", "flowos")


def snapped_size(image_size: int, scale: int, patch_size: int) -> int:
    """Target side length for a scale: image_size/scale rounded to the nearest
    patch multiple (ties round up)."""
    raw = image_size / scale
    mult = int(math.floor(raw / patch_size + 0.5))
    return max(mult, 1) * patch_size


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 64
    patch_size: int = 16
    scales: tuple[int, ...] = (1, 2)
    layers: int = 4
    heads: int = 4
    embed_dim: int = 64
    mlp_ratio: float = 4.0
    num_classes: int = 3
    dropout_rate: float = 0.1
    classifier_hidden: int | None = None
    # Reading switches for the two ambiguous fusion reductions: attention
    # normalization per row (default) vs one global mean, and importance from
    # column means (default, the formula) vs row means (the prose).
    attention_norm: str = "row"
    importance_axis: int = 0

    def __post_init__(self):
        if self.layers < 2:
            raise ValueError("need at least 2 encoder layers (L-1 recorded + fused last)")
        if self.embed_dim % self.heads != 0:
            raise ValueError(
                f"heads ({self.heads}) must divide embed_dim ({self.embed_dim})"
            )
        if self.attention_norm not in ("row", "global"):
            raise ValueError("attention_norm must be 'row' or 'global'")
        if self.importance_axis not in (0, 1):
            raise ValueError("importance_axis must be 0 (column mean) or 1 (row mean)")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if len(self.scales) < 1 or len(set(self.scales)) != len(self.scales):
            raise ValueError("scales must be a non-empty list of distinct factors")
        for s in self.scales:
            g = self.grid_size(s)
            if g < 2:
                raise ValueError(
                    f"scale {s} yields a {g}x{g} patch grid; grids below 2x2 "
                    "are rejected (single-patch embeddings carry no spatial relations)"
                )

    def scale_size(self, scale: int) -> int:
        return snapped_size(self.image_size, scale, self.patch_size)

    def grid_size(self, scale: int) -> int:
        return self.scale_size(scale) // self.patch_size

    def num_patches(self, scale: int) -> int:
        return self.grid_size(scale) ** 2

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    @property
    def hidden_dim(self) -> int:
        return int(self.embed_dim * self.mlp_ratio)

    @property
    def feature_dim(self) -> int:
        return len(self.scales) * self.embed_dim

    @property
    def classifier_hidden_dim(self) -> int:
        return self.classifier_hidden if self.classifier_hidden else self.embed_dim


def multiscale_views(img: np.ndarray, config: ModelConfig) -> list[np.ndarray]:
    """Resized copies of ``img`` for every configured scale (scale 1 passes
    the input through unchanged)."""
    img = np.asarray(img)
    if img.shape[:2] != (config.image_size, config.image_size):
        raise ValueError(
            f"image shape {img.shape[:2]} does not match configured size "
            f"{config.image_size}"
        )
    views = []
    for s in config.scales:
        if s == 1 and config.scale_size(1) == config.image_size:
            views.append(img)
        else:
            size = config.scale_size(s)
            views.append(bilinear_resize(img, size, size))
    return views


def patchify(img: np.ndarray, patch_size: int) -> np.ndarray:
    """Non-overlapping patches as rows: (grid*grid, patch*patch*channels)."""
    h, w = img.shape[:2]
    c = img.shape[2] if img.ndim == 3 else 1
    if h % patch_size or w % patch_size:
        raise ValueError(f"image {h}x{w} not divisible by patch size {patch_size}")
    gh, gw = h // patch_size, w // patch_size
    x = img.reshape(gh, patch_size, gw, patch_size, c)
    return x.transpose(0, 2, 1, 3, 4).reshape(gh * gw, patch_size * patch_size * c)


# -- attention fusion ---------------------------------------------------------


def layer_attention_normalize(attn: Tensor, mode: str = "row") -> Tensor:
    """Head-average a (B, H, T, T) attention tensor and rescale so every row
    of the result has mean 1 (or, in 'global' mode, the whole matrix does)."""
    a = attn.mean(axis=1)  # (B, T, T)
    if mode == "row":
        denom = a.mean(axis=-1, keepdims=True)
    elif mode == "global":
        denom = a.mean(axis=-1, keepdims=True).mean(axis=-2, keepdims=True)
    else:
        raise ValueError(f"unknown attention normalization mode '{mode}'")
    return a / denom


def attention_rollup(stack: list[Tensor], mode: str = "row") -> Tensor:
    """Depth-ordered product of the normalized per-layer attention matrices:
    last recorded layer on the left, first layer on the right."""
    if not stack:
        raise ValueError("empty attention stack")
    normed = [layer_attention_normalize(a, mode) for a in stack]
    g = normed[-1]
    for m in reversed(normed[:-1]):
        g = g @ m
    return g


def patch_importance(g: Tensor, axis: int = 0) -> Tensor:
    """Per-patch weights: token-axis mean of the rolled-up matrix (cls column
    dropped), normalized so the maximum is exactly 1."""
    if axis == 0:
        means = g.mean(axis=-2)  # column means
    else:
        means = g.mean(axis=-1)  # row means
    patches = means[:, 1:]
    return patches / patches.max(axis=-1, keepdims=True)


# -- the model -----------------------------------------------------------------


def _trunc_normal(rng: np.random.Generator, shape, std: float, dtype) -> np.ndarray:
    x = rng.standard_normal(shape) * std
    for _ in range(8):
        bad = np.abs(x) > 2 * std
        if not bad.any():
            break
        x[bad] = rng.standard_normal(int(bad.sum())) * std
    return np.clip(x, -2 * std, 2 * std).astype(dtype)


def _xavier(rng: np.random.Generator, shape, dtype) -> np.ndarray:
    # variance-preserving init; the backbone trains from scratch here, so the
    # tiny-std scheme used for pretrained checkpoints stalls at desk scale
    std = math.sqrt(2.0 / (shape[-2] + shape[-1]))
    return (rng.standard_normal(shape) * std).astype(dtype)


class MicroExpressionModel:
    """Two parallel multi-scale encoders (texture + motion) with a fused head."""

    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        self.rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}
        d = config.embed_dim
        hid = config.hidden_dim
        patch_dim = config.patch_size * config.patch_size * 3

        def param(name: str, shape, init: str = "xavier"):
            if init == "xavier":
                data = _xavier(self.rng, shape, dtype)
            elif init == "trunc":
                data = _trunc_normal(self.rng, shape, 0.02, dtype)
            elif init == "zeros":
                data = np.zeros(shape, dtype=dtype)
            elif init == "ones":
                data = np.ones(shape, dtype=dtype)
            else:
                raise ValueError(init)
            self.params[name] = Tensor(data, requires_grad=True, dtype=dtype)

        for mod in MODALITIES:
            param(f"{mod}.patch_proj.w", (patch_dim, d))
            param(f"{mod}.patch_proj.b", (d,), "zeros")
            param(f"{mod}.cls", (1, 1, d), "trunc")
            for si in range(len(config.scales)):
                n = config.num_patches(config.scales[si])
                param(f"{mod}.pos.{si}", (n + 1, d), "trunc")
            for b in range(config.layers):
                pre = f"{mod}.block{b}"
                param(f"{pre}.ln1.g", (d,), "ones")
                param(f"{pre}.ln1.b", (d,), "zeros")
                param(f"{pre}.qkv.w", (d, 3 * d))
                param(f"{pre}.qkv.b", (3 * d,), "zeros")
                param(f"{pre}.attn_out.w", (d, d))
                param(f"{pre}.attn_out.b", (d,), "zeros")
                param(f"{pre}.ln2.g", (d,), "ones")
                param(f"{pre}.ln2.b", (d,), "zeros")
                param(f"{pre}.fc1.w", (d, hid))
                param(f"{pre}.fc1.b", (hid,), "zeros")
                param(f"{pre}.fc2.w", (hid, d))
                param(f"{pre}.fc2.b", (d,), "zeros")

        chid = config.classifier_hidden_dim
        param("head.fc1.w", (2 * config.feature_dim, chid))
        param("head.fc1.b", (chid,), "zeros")
        param("head.fc2.w", (chid, config.num_classes))
        param("head.fc2.b", (config.num_classes,), "zeros")

    # -- pieces ------------------------------------------------------------

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def patch_embed(self, images: np.ndarray, modality: str, scale_index: int) -> Tensor:
        """Embed a batch of scale views: (B, S, S, 3) -> tokens (B, N+1, D).

        Pixel values are centered around mid-gray before projection, so a
        uniform 0.5 image is the embedding's neutral input.
        """
        cfg = self.config
        scale = cfg.scales[scale_index]
        size = cfg.scale_size(scale)
        images = np.asarray(images, dtype=self.dtype)
        if images.ndim == 3:
            images = images[None]
        if images.shape[1:] != (size, size, 3):
            raise ValueError(
                f"scale {scale} expects {size}x{size}x3 views, got {images.shape[1:]}"
            )
        batch = images.shape[0]
        flat = np.stack([patchify(im, cfg.patch_size) for im in images]) - 0.5
        x = Tensor(flat, dtype=self.dtype)
        tokens = x @ self.params[f"{modality}.patch_proj.w"] + self.params[f"{modality}.patch_proj.b"]
        cls = self.params[f"{modality}.cls"] + Tensor(
            np.zeros((batch, 1, cfg.embed_dim), dtype=self.dtype)
        )
        seq = concat([cls, tokens], axis=1)
        return seq + self.params[f"{modality}.pos.{scale_index}"]

    def _block(self, x: Tensor, modality: str, index: int) -> tuple[Tensor, Tensor]:
        cfg = self.config
        p = self.params
        pre = f"{modality}.block{index}"
        b, t, d = x.shape
        h = layernorm(x, p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])
        qkv = h @ p[f"{pre}.qkv.w"] + p[f"{pre}.qkv.b"]
        heads, hd = cfg.heads, cfg.head_dim

        def split(part: Tensor) -> Tensor:
            return part.reshape(b, t, heads, hd).transpose((0, 2, 1, 3))

        q = split(qkv[:, :, :d])
        k = split(qkv[:, :, d : 2 * d])
        v = split(qkv[:, :, 2 * d :])
        logits = (q @ k.transpose((0, 1, 3, 2))) * (1.0 / math.sqrt(hd))
        attn = softmax(logits, axis=-1)  # (B, H, T, T)
        ctx = (attn @ v).transpose((0, 2, 1, 3)).reshape(b, t, d)
        x = x + (ctx @ p[f"{pre}.attn_out.w"] + p[f"{pre}.attn_out.b"])
        h2 = layernorm(x, p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"])
        ffn = (h2 @ p[f"{pre}.fc1.w"] + p[f"{pre}.fc1.b"]).gelu()
        ffn = ffn @ p[f"{pre}.fc2.w"] + p[f"{pre}.fc2.b"]
        return x + ffn, attn

    def encoder_forward(self, tokens: Tensor, modality: str) -> tuple[Tensor, list[Tensor]]:
        """Run the first L-1 blocks, recording every post-softmax attention."""
        stack: list[Tensor] = []
        x = tokens
        for i in range(self.config.layers - 1):
            x, attn = self._block(x, modality, i)
            stack.append(attn)
        return x, stack

    def weighted_last_layer(self, z: Tensor, importance: Tensor, modality: str) -> Tensor:
        """Reweight patch tokens by their importance and run the final block;
        returns the per-scale cls representation (B, D)."""
        b, t, d = z.shape
        cls_tok = z[:, :1, :]
        patches = z[:, 1:, :] * importance.reshape(b, t - 1, 1)
        fused = concat([cls_tok, patches], axis=1)
        out, _ = self._block(fused, modality, self.config.layers - 1)
        return out[:, 0, :]

    def scale_representation(
        self, views: np.ndarray, modality: str, scale_index: int
    ) -> tuple[Tensor, Tensor, list[Tensor]]:
        """Full per-scale pass: returns (cls feature (B, D), importance, stack)."""
        tokens = self.patch_embed(views, modality, scale_index)
        z, stack = self.encoder_forward(tokens, modality)
        g = attention_rollup(stack, self.config.attention_norm)
        imp = patch_importance(g, self.config.importance_axis)
        return self.weighted_last_layer(z, imp, modality), imp, stack

    def modality_feature(self, images: np.ndarray, modality: str) -> Tensor:
        """Concatenated per-scale cls features: (B, num_scales * D)."""
        images = np.asarray(images, dtype=self.dtype)
        if images.ndim == 3:
            images = images[None]
        reprs = []
        for si in range(len(self.config.scales)):
            views = np.stack([v for v in self._views_for_scale(images, si)])
            feat, _, _ = self.scale_representation(views, modality, si)
            reprs.append(feat)
        return concat(reprs, axis=1)

    def _views_for_scale(self, images: np.ndarray, scale_index: int) -> list[np.ndarray]:
        cfg = self.config
        scale = cfg.scales[scale_index]
        size = cfg.scale_size(scale)
        if scale == 1 and size == cfg.image_size:
            return list(images)
        return [bilinear_resize(im, size, size) for im in images]

    def classify(
        self,
        dy_feature: Tensor,
        flowos_feature: Tensor,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Two-layer head over the concatenated modality features -> logits."""
        p = self.params
        x = concat([dy_feature, flowos_feature], axis=1)
        h = (x @ p["head.fc1.w"] + p["head.fc1.b"]).relu()
        if train and self.config.dropout_rate > 0.0:
            h = dropout(h, self.config.dropout_rate, rng or self.rng, train=True)
        return h @ p["head.fc2.w"] + p["head.fc2.b"]

    def forward(
        self,
        dy_images: np.ndarray,
        flowos_images: np.ndarray,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, Tensor, Tensor]:
        """Full pass: returns (logits, dy feature, flow-strain feature)."""
        dy_feat = self.modality_feature(dy_images, "dy")
        flow_feat = self.modality_feature(flowos_images, "flowos")
        logits = self.classify(dy_feat, flow_feat, train=train, rng=rng)
        return logits, dy_feat, flow_feat

    def predict(self, dy_images: np.ndarray, flowos_images: np.ndarray) -> np.ndarray:
        logits, _, _ = self.forward(dy_images, flowos_images, train=False)
        return logits.data.argmax(axis=-1)


# -- checkpointing ---------------------------------------------------------------


def save_checkpoint(model: MicroExpressionModel, directory: str | Path) -> None:
    """Write the config manifest plus one .msmt tensor file per parameter."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": asdict(model.config),
        "params": {name: list(p.data.shape) for name, p in model.params.items()},
    }
    tmp = directory / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    os.replace(tmp, directory / "manifest.json")
    for name, p in model.params.items():
        write_tensor(directory / (name + ".msmt"), p.data)


def load_checkpoint(directory: str | Path) -> MicroExpressionModel:
    """Rebuild a model from a checkpoint directory; shape mismatches are fatal."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    cfg_dict = dict(manifest["config"])
    cfg_dict["scales"] = tuple(cfg_dict["scales"])
    config = ModelConfig(**cfg_dict)
    model = MicroExpressionModel(config)
    declared = manifest["params"]
    if set(declared) != set(model.params):
        missing = set(model.params) - set(declared)
        extra = set(declared) - set(model.params)
        raise ValueError(
            f"checkpoint parameter names do not match config (missing {sorted(missing)}, "
            f"unexpected {sorted(extra)})"
        )
    for name, p in model.params.items():
        arr = read_tensor(directory / (name + ".msmt"))
        if tuple(arr.shape) != tuple(p.data.shape):
            raise ValueError(
                f"checkpoint shape mismatch for '{name}': file has {arr.shape}, "
                f"model expects {p.data.shape}"
            )
        p.data = arr.astype(model.dtype)
    return model
