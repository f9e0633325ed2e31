"""Training objectives: cross-modal contrastive loss, cross-entropy, and
their blended total.

The contrastive loss pairs samples across the two modality feature matrices
by index: for anchor i, the positive is the other modality's row i, the
denominator sums the anchor's similarities to all other-modality rows k != i
plus every same-index column term (which includes the positive once). The
total objective is (1 - alpha) * contrastive + alpha * cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor

__all__ = [
    "ContrastiveBatch",
    "cosine_sim",
    "contrastive_anchor_loss",
    "contrastive_loss",
    "cross_entropy",
    "total_loss",
]


@dataclass
class ContrastiveBatch:
    """Row-aligned feature matrices of the two modalities plus temperature."""

    dy: np.ndarray       # B x K
    flowos: np.ndarray   # B x K
    temperature: float = 0.1

    def __post_init__(self):
        dy = np.asarray(self.dy, dtype=np.float64)
        fl = np.asarray(self.flowos, dtype=np.float64)
        if dy.ndim != 2 or dy.shape != fl.shape or dy.shape[0] < 1:
            raise ValueError(
                f"modality matrices must be equal-shape B x K with B >= 1, "
                f"got {dy.shape} and {fl.shape}"
            )
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        self.dy = dy
        self.flowos = fl

    @property
    def batch_size(self) -> int:
        return self.dy.shape[0]


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two non-zero vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity of a zero vector is undefined")
    return float(a @ b / (na * nb))


def contrastive_anchor_loss(
    batch: ContrastiveBatch, i: int, anchor_modality: str = "dy"
) -> float:
    """Single-anchor loss term for sample ``i`` (0-based), scalar arithmetic."""
    b = batch.batch_size
    if not 0 <= i < b:
        raise ValueError(f"anchor index {i} out of range for batch size {b}")
    tau = batch.temperature
    if anchor_modality == "dy":
        anchors, others = batch.dy, batch.flowos
    elif anchor_modality == "flowos":
        anchors, others = batch.flowos, batch.dy
    else:
        raise ValueError(f"unknown anchor modality '{anchor_modality}'")
    pos = np.exp(cosine_sim(anchors[i], others[i]) / tau)
    denom = 0.0
    for k in range(b):
        if k != i:
            denom += np.exp(cosine_sim(anchors[i], others[k]) / tau)
    for k in range(b):
        denom += np.exp(cosine_sim(anchors[k], others[i]) / tau)
    return float(-np.log(pos / denom))


def _normalize_rows(x: Tensor) -> Tensor:
    sq = (x * x).sum(axis=-1, keepdims=True)
    if np.any(sq.data <= 0.0):
        raise ValueError("contrastive features contain a zero vector")
    return x / sq.sqrt()


def contrastive_loss(
    dy: Tensor | np.ndarray,
    flowos: Tensor | np.ndarray,
    temperature: float = 0.1,
) -> Tensor:
    """Symmetrized cross-modal contrastive loss over a batch (differentiable).

    Exponentials are safe without shifting: cosine similarities are bounded
    by 1, so the largest magnitude is exp(1 / temperature).
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    dy = dy if isinstance(dy, Tensor) else Tensor(np.asarray(dy))
    flowos = flowos if isinstance(flowos, Tensor) else Tensor(np.asarray(flowos))
    if dy.shape != flowos.shape or dy.ndim != 2:
        raise ValueError(f"modality features must be equal-shape B x K, got {dy.shape} vs {flowos.shape}")
    b = dy.shape[0]
    sims = _normalize_rows(dy) @ _normalize_rows(flowos).transpose((1, 0))  # B x B
    e = (sims * (1.0 / temperature)).exp()
    idx = np.arange(b)
    diag_e = e[idx, idx]
    diag_s = sims[idx, idx]
    row = e.sum(axis=1)
    col = e.sum(axis=0)
    denom_dy = row - diag_e + col        # anchor in texture modality
    denom_flow = col - diag_e + row      # anchor in motion modality
    log_pos = diag_s * (1.0 / temperature)
    per_i = (denom_dy.log() - log_pos) + (denom_flow.log() - log_pos)
    return per_i.sum() * (1.0 / (2 * b))


def cross_entropy(logits: Tensor | np.ndarray, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy, max-stabilized; labels are class indices."""
    logits = logits if isinstance(logits, Tensor) else Tensor(np.asarray(logits))
    if logits.ndim != 2:
        raise ValueError(f"logits must be B x C, got shape {logits.shape}")
    labels = np.asarray(labels)
    b, c = logits.shape
    if labels.shape != (b,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {b}")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels must lie in [0, {c}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    shift = Tensor(logits.data.max(axis=1, keepdims=True))
    z = logits - shift
    lse = z.exp().sum(axis=1).log()
    picked = z[np.arange(b), labels.astype(np.intp)]
    return (lse - picked).sum() * (1.0 / b)


def total_loss(ce, con, alpha: float):
    """Convex blend (1 - alpha) * contrastive + alpha * cross-entropy."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return con * (1.0 - alpha) + ce * alpha
