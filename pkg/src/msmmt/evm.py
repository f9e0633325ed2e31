"""Linear Eulerian motion magnification.

Each frame is decomposed into a Laplacian pyramid, each pyramid level is
temporally band-passed with an ideal FFT filter, the band-passed signal is
scaled by the amplification factor and added back, and the pyramid is
collapsed. Amplification factor 10 is the pipeline default.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .imageops import pyramid_down, pyramid_up
from .prep import VideoClip

__all__ = ["evm_magnify"]

MIN_FRAMES = 8


def _laplacian_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    gauss = [img]
    for _ in range(levels):
        gauss.append(pyramid_down(gauss[-1]))
    pyr = []
    for i in range(levels):
        pyr.append(gauss[i] - pyramid_up(gauss[i + 1], gauss[i].shape[:2]))
    pyr.append(gauss[levels])
    return pyr


def _collapse(pyr: list[np.ndarray]) -> np.ndarray:
    img = pyr[-1]
    for lap in reversed(pyr[:-1]):
        img = lap + pyramid_up(img, lap.shape[:2])
    return img


def _ideal_bandpass(stack: np.ndarray, fps: float, f_lo: float, f_hi: float) -> np.ndarray:
    """Zero out temporal frequencies outside [f_lo, f_hi]; axis 0 is time."""
    t = stack.shape[0]
    spec = np.fft.rfft(stack, axis=0)
    freqs = np.fft.rfftfreq(t, d=1.0 / fps)
    mask = (freqs >= f_lo) & (freqs <= f_hi)
    spec *= mask.reshape((-1,) + (1,) * (stack.ndim - 1))
    return np.fft.irfft(spec, n=t, axis=0)


def evm_magnify(
    clip: VideoClip,
    alpha: float = 10.0,
    band: tuple[float, float] = (0.4, 8.0),
    levels: int = 4,
) -> VideoClip:
    """Amplify subtle in-band temporal variation of a clip by ``alpha``.

    With ``alpha == 0`` the clip round-trips through the pyramid unchanged
    (to within float tolerance). Output pixels are clipped back to [0, 1].
    """
    f_lo, f_hi = band
    if clip.num_frames < MIN_FRAMES:
        raise ValueError(
            f"clip too short for temporal filtering: {clip.num_frames} < {MIN_FRAMES} frames"
        )
    if levels < 1:
        raise ValueError("need at least one pyramid level")
    if not 0.0 <= f_lo < f_hi:
        raise ValueError(f"invalid band ({f_lo}, {f_hi})")
    if f_hi >= clip.fps / 2.0:
        raise ValueError(f"band upper edge {f_hi} Hz exceeds Nyquist ({clip.fps / 2} Hz)")
    min_side = min(clip.frames.shape[1], clip.frames.shape[2])
    max_levels = max(1, int(np.floor(np.log2(min_side / 4))))
    levels = min(levels, max_levels)

    frames64 = clip.frames.astype(np.float64)
    per_frame = [_laplacian_pyramid(fr, levels) for fr in frames64]
    out_pyr = []
    for lvl in range(levels + 1):
        stack = np.stack([p[lvl] for p in per_frame])
        if alpha != 0.0:
            stack = stack + alpha * _ideal_bandpass(stack, clip.fps, f_lo, f_hi)
        out_pyr.append(stack)

    out = np.empty_like(frames64)
    for t in range(clip.num_frames):
        out[t] = _collapse([out_pyr[lvl][t] for lvl in range(levels + 1)])
    out = np.clip(out, 0.0, 1.0).astype(np.float32)
    return replace(clip, frames=out)
