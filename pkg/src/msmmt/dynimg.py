"""Dynamic images via rank pooling.

A clip is summarized by the weight vector of a linear scoring function whose
scores respect the temporal order of the frames. The vector minimizes

    E(d) = (lambda/2) ||d||^2
         + 2 / (T (T-1)) * sum_{l > t} max(0, 1 - <d, phi_l> + <d, phi_t>)

where phi_t is the running mean of the per-frame feature vectors (flattened
pixels). The objective is convex; it is minimized by full-batch subgradient
descent from d = 0 with best-iterate tracking. Rendered as an image, the
minimizer is the clip's dynamic image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prep import VideoClip

__all__ = [
    "RankPoolProblem",
    "DynamicImage",
    "frame_features",
    "temporal_mean",
    "rank_score",
    "pool_objective",
    "rank_pool",
    "render_dynamic_image",
    "dynamic_image",
]


@dataclass
class RankPoolProblem:
    """Per-frame feature vectors and the regularizer weight."""

    features: np.ndarray  # T x dim
    lambda_reg: float = 1.0

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] < 2:
            raise ValueError("features must be T x dim with T >= 2")
        if not np.all(np.isfinite(f)):
            raise ValueError("non-finite frame features")
        if self.lambda_reg <= 0:
            raise ValueError("lambda_reg must be positive")
        self.features = f

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]


@dataclass
class DynamicImage:
    """Min-max normalized rendering of the pooled descriptor, raw vector kept."""

    image: np.ndarray       # H x W x C in [0, 1]
    descriptor: np.ndarray  # raw d*


def frame_features(frames: np.ndarray, use_sqrt: bool = False) -> np.ndarray:
    """Flatten each frame to a feature vector; optional per-pixel square root."""
    f = np.asarray(frames, dtype=np.float64).reshape(frames.shape[0], -1)
    if use_sqrt:
        f = np.sqrt(np.maximum(f, 0.0))
    return f


def running_means(features: np.ndarray) -> np.ndarray:
    """All running means phi_1..phi_T as rows of a T x dim matrix."""
    f = np.asarray(features, dtype=np.float64)
    csum = np.cumsum(f, axis=0)
    return csum / np.arange(1, f.shape[0] + 1)[:, None]


def temporal_mean(features: np.ndarray, t: int) -> np.ndarray:
    """Mean of the first ``t`` feature vectors (t is 1-based)."""
    features = np.asarray(features, dtype=np.float64)
    if not 1 <= t <= features.shape[0]:
        raise ValueError(f"t={t} out of range [1, {features.shape[0]}]")
    return features[:t].mean(axis=0)


def rank_score(d: np.ndarray, phi_t: np.ndarray) -> float:
    d = np.asarray(d, dtype=np.float64)
    phi_t = np.asarray(phi_t, dtype=np.float64)
    if d.shape != phi_t.shape:
        raise ValueError(f"dimension mismatch: {d.shape} vs {phi_t.shape}")
    return float(d @ phi_t)


def _pair_diffs(phi: np.ndarray) -> np.ndarray:
    """Rows phi_l - phi_t for every ordered pair l > t."""
    t_count = phi.shape[0]
    t_idx, l_idx = np.triu_indices(t_count, k=1)  # t_idx < l_idx pairwise
    return phi[l_idx] - phi[t_idx]


def pool_objective(d: np.ndarray, problem: RankPoolProblem) -> float:
    """E(d): quadratic regularizer plus averaged pairwise hinge loss."""
    phi = running_means(problem.features)
    diffs = _pair_diffs(phi)  # rows phi_l - phi_t, l > t
    t_count = problem.num_frames
    coef = 2.0 / (t_count * (t_count - 1))
    margins = 1.0 - diffs @ np.asarray(d, dtype=np.float64)
    hinge = np.maximum(margins, 0.0).sum()
    return float(0.5 * problem.lambda_reg * np.dot(d, d) + coef * hinge)


def rank_pool(
    problem: RankPoolProblem, iters: int = 500, step: float = 1e-3
) -> np.ndarray:
    """Minimize the rank-pooling objective; returns the best iterate by value."""
    phi = running_means(problem.features)
    diffs = _pair_diffs(phi)
    t_count = problem.num_frames
    coef = 2.0 / (t_count * (t_count - 1))
    lam = problem.lambda_reg

    d = np.zeros(phi.shape[1], dtype=np.float64)
    margins = np.ones(diffs.shape[0], dtype=np.float64)  # 1 - diffs @ 0
    best_obj = coef * margins.sum()
    best_d = d.copy()
    for _ in range(iters):
        active = margins > 0.0
        grad = lam * d - coef * (active @ diffs)
        d = d - step * grad
        margins = 1.0 - diffs @ d
        obj = 0.5 * lam * np.dot(d, d) + coef * np.maximum(margins, 0.0).sum()
        if obj < best_obj:
            best_obj = obj
            best_d = d.copy()
    return best_d


def render_dynamic_image(d: np.ndarray, h: int, w: int, c: int) -> DynamicImage:
    """Reshape the descriptor to H x W x C and min-max normalize to [0, 1]."""
    d = np.asarray(d, dtype=np.float64)
    if d.size != h * w * c:
        raise ValueError(f"descriptor length {d.size} != {h}*{w}*{c}")
    img = d.reshape(h, w, c)
    lo, hi = img.min(), img.max()
    if hi - lo < 1e-12:
        norm = np.full((h, w, c), 0.5)
    else:
        norm = (img - lo) / (hi - lo)
    return DynamicImage(image=norm.astype(np.float32), descriptor=d)


def dynamic_image(
    clip: VideoClip,
    lambda_reg: float = 1.0,
    iters: int = 500,
    step: float = 1e-3,
    use_sqrt: bool = False,
) -> DynamicImage:
    """Dynamic image of a clip's expression interval (onset through offset)."""
    frames = clip.frames[clip.onset : clip.offset + 1]
    if frames.shape[0] < 2:
        raise ValueError("expression interval must span at least 2 frames")
    problem = RankPoolProblem(frame_features(frames, use_sqrt), lambda_reg)
    d = rank_pool(problem, iters=iters, step=step)
    h, w, c = clip.frame_shape
    return render_dynamic_image(d, h, w, c)
