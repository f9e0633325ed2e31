"""TV-L1 optical flow, optical strain, and the 3-channel flow-strain image.

The flow solver is the duality-based formulation: a coarse-to-fine pyramid
(factor 0.5) where each level alternates a pointwise thresholding step on
the linearized brightness-constancy data term with dual ascent on the total
variation regularizer, warping the moving image by the current flow between
rounds. Optical strain is the magnitude of the symmetric gradient of the
flow field; together with the two flow components it forms the motion
modality image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imageops import bilinear_resize, gaussian_blur, to_gray, warp_displacement
from .prep import VideoClip

__all__ = [
    "TVL1Params",
    "FlowField",
    "StrainMap",
    "tvl1_flow",
    "strain",
    "compose_flow_os",
    "clip_flow",
    "flow_os_image",
]

MIN_PYRAMID_SIDE = 8


@dataclass(frozen=True)
class TVL1Params:
    """Solver parameters; defaults are the usual reference settings."""

    attachment: float = 0.15    # data-term weight (lambda)
    tightness: float = 0.3      # coupling between data and TV variables (theta)
    tau: float = 0.25           # dual ascent step
    warps: int = 5              # warps per pyramid level
    dual_iters: int = 30        # thresholding + dual iterations per warp
    levels: int | None = 5      # pyramid depth; None = as deep as the image allows
    median_filter: bool = True  # 3x3 median on the flow after each warp


@dataclass
class FlowField:
    """Per-pixel displacement: u horizontal (+x right), v vertical (+y down)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise ValueError("u and v must be 2-D arrays of identical shape")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise ValueError("non-finite flow values")


@dataclass
class StrainMap:
    """Normal and shear strain components and the per-pixel magnitude."""

    eps: np.ndarray
    eps_xx: np.ndarray
    eps_yy: np.ndarray
    eps_xy: np.ndarray
    eps_yx: np.ndarray


def _forward_grad(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = np.zeros_like(f)
    gy = np.zeros_like(f)
    gx[:, :-1] = f[:, 1:] - f[:, :-1]
    gy[:-1, :] = f[1:, :] - f[:-1, :]
    return gx, gy


def _divergence(px: np.ndarray, py: np.ndarray) -> np.ndarray:
    div = np.zeros_like(px)
    div[:, 0] = px[:, 0]
    div[:, 1:] = px[:, 1:] - px[:, :-1]
    div[0, :] += py[0, :]
    div[1:, :] += py[1:, :] - py[:-1, :]
    return div


def _centered_grad(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.gradient(f, axis=1), np.gradient(f, axis=0)


def _tvl1_level(
    i0: np.ndarray,
    i1: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    p: TVL1Params,
) -> tuple[np.ndarray, np.ndarray]:
    lt = p.attachment * p.tightness
    taut = p.tau / p.tightness
    i1x, i1y = _centered_grad(i1)

    pu1 = np.zeros_like(u)
    pu2 = np.zeros_like(u)
    pv1 = np.zeros_like(u)
    pv2 = np.zeros_like(u)

    for _ in range(p.warps):
        i1w = warp_displacement(i1, u, v)
        i1wx = warp_displacement(i1x, u, v)
        i1wy = warp_displacement(i1y, u, v)
        grad_sq = i1wx * i1wx + i1wy * i1wy
        rho_const = i1w - i1wx * u - i1wy * v - i0

        for _ in range(p.dual_iters):
            rho = rho_const + i1wx * u + i1wy * v
            # pointwise shrinkage on the linearized data term
            d1 = np.where(rho < -lt * grad_sq, lt * i1wx, 0.0)
            d2 = np.where(rho < -lt * grad_sq, lt * i1wy, 0.0)
            high = rho > lt * grad_sq
            d1 = np.where(high, -lt * i1wx, d1)
            d2 = np.where(high, -lt * i1wy, d2)
            mid = ~high & (rho >= -lt * grad_sq)
            safe = np.maximum(grad_sq, 1e-12)
            d1 = np.where(mid, -rho * i1wx / safe, d1)
            d2 = np.where(mid, -rho * i1wy / safe, d2)
            v1_aux = u + d1
            v2_aux = v + d2

            # dual ascent on the TV term for each flow component
            u = v1_aux + p.tightness * _divergence(pu1, pu2)
            v = v2_aux + p.tightness * _divergence(pv1, pv2)
            ux, uy = _forward_grad(u)
            norm_u = 1.0 + taut * np.sqrt(ux * ux + uy * uy)
            pu1 = (pu1 + taut * ux) / norm_u
            pu2 = (pu2 + taut * uy) / norm_u
            vx, vy = _forward_grad(v)
            norm_v = 1.0 + taut * np.sqrt(vx * vx + vy * vy)
            pv1 = (pv1 + taut * vx) / norm_v
            pv2 = (pv2 + taut * vy) / norm_v

        if p.median_filter:
            u = ndimage.median_filter(u, size=3, mode="nearest")
            v = ndimage.median_filter(v, size=3, mode="nearest")
    return u, v


def tvl1_flow(i0: np.ndarray, i1: np.ndarray, params: TVL1Params | None = None) -> FlowField:
    """Estimate the flow carrying ``i0`` onto ``i1`` (grayscale, values in [0, 1]).

    The returned field satisfies i1(x + u, y + v) ~= i0(x, y).
    """
    if params is None:
        params = TVL1Params()
    # the attachment default is calibrated for 0..255 intensities; the
    # interface takes [0, 1] frames, so rescale internally (flow is unchanged,
    # only the data/TV balance matches the reference parameterization)
    i0 = np.asarray(i0, dtype=np.float64) * 255.0
    i1 = np.asarray(i1, dtype=np.float64) * 255.0
    if i0.shape != i1.shape or i0.ndim != 2:
        raise ValueError(f"frames must be 2-D and same shape, got {i0.shape} vs {i1.shape}")
    if min(i0.shape) < MIN_PYRAMID_SIDE:
        raise ValueError(
            f"image side {min(i0.shape)} px too small: pyramid would shrink below "
            f"{MIN_PYRAMID_SIDE} px"
        )
    max_levels = int(np.floor(np.log2(min(i0.shape) / MIN_PYRAMID_SIDE))) + 1
    levels = max_levels if params.levels is None else min(params.levels, max_levels)

    pyr0 = [i0]
    pyr1 = [i1]
    for _ in range(levels - 1):
        a = gaussian_blur(pyr0[-1], 0.8)
        b = gaussian_blur(pyr1[-1], 0.8)
        h, w = a.shape
        nh, nw = max(1, round(h / 2)), max(1, round(w / 2))
        pyr0.append(bilinear_resize(a, nh, nw))
        pyr1.append(bilinear_resize(b, nh, nw))

    h, w = pyr0[-1].shape
    u = np.zeros((h, w))
    v = np.zeros((h, w))
    for lvl in range(levels - 1, -1, -1):
        a, b = pyr0[lvl], pyr1[lvl]
        if u.shape != a.shape:
            sy = a.shape[0] / u.shape[0]
            sx = a.shape[1] / u.shape[1]
            u = bilinear_resize(u, a.shape[0], a.shape[1]) * sx
            v = bilinear_resize(v, a.shape[0], a.shape[1]) * sy
        u, v = _tvl1_level(a, b, u, v, params)
    return FlowField(u=u, v=v)


def strain(flow: FlowField) -> StrainMap:
    """Symmetric-gradient strain of a flow field (central differences inside,
    one-sided at the borders)."""
    du_dx, du_dy = np.gradient(flow.u, axis=1), np.gradient(flow.u, axis=0)
    dv_dx, dv_dy = np.gradient(flow.v, axis=1), np.gradient(flow.v, axis=0)
    eps_xx = du_dx
    eps_yy = dv_dy
    eps_xy = 0.5 * (du_dy + dv_dx)
    eps_yx = eps_xy.copy()
    eps = np.sqrt(eps_xx**2 + eps_yy**2 + eps_xy**2 + eps_yx**2)
    return StrainMap(eps=eps, eps_xx=eps_xx, eps_yy=eps_yy, eps_xy=eps_xy, eps_yx=eps_yx)


def _normalize_channel(x: np.ndarray) -> np.ndarray:
    lo, hi = x.min(), x.max()
    if hi - lo < 1e-12:
        return np.full_like(x, 0.5)
    return (x - lo) / (hi - lo)


def compose_flow_os(flow: FlowField, strainmap: StrainMap) -> np.ndarray:
    """Stack (u, v, strain magnitude) as an H x W x 3 image, each channel
    independently min-max normalized to [0, 1] (constant channels become 0.5)."""
    if flow.u.shape != strainmap.eps.shape:
        raise ValueError("flow and strain shapes differ")
    channels = [_normalize_channel(flow.u), _normalize_channel(flow.v),
                _normalize_channel(strainmap.eps)]
    return np.stack(channels, axis=-1).astype(np.float32)


def clip_flow(
    clip: VideoClip,
    params: TVL1Params | None = None,
    frame_pair: str = "onset_apex",
) -> tuple[FlowField, StrainMap]:
    """Flow and strain of a clip's onset->apex (or onset->offset) frame pair."""
    if frame_pair == "onset_apex":
        a, b = clip.onset, clip.apex
    elif frame_pair == "onset_offset":
        a, b = clip.onset, clip.offset
    else:
        raise ValueError(f"unknown frame_pair '{frame_pair}'")
    if a == b:
        b = min(b + 1, clip.num_frames - 1)
    i0 = to_gray(clip.frames[a].astype(np.float64))
    i1 = to_gray(clip.frames[b].astype(np.float64))
    field = tvl1_flow(i0, i1, params)
    return field, strain(field)


def flow_os_image(
    clip: VideoClip,
    params: TVL1Params | None = None,
    frame_pair: str = "onset_apex",
) -> np.ndarray:
    """Motion modality image of a clip (see :func:`clip_flow`)."""
    field, strainmap = clip_flow(clip, params, frame_pair)
    return compose_flow_os(field, strainmap)
