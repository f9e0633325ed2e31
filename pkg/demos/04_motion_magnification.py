"""
Eulerian motion magnification
=============================

Sub-pixel motion too small to see becomes visible when the temporally
band-passed pyramid coefficients are amplified and added back. Here a
0.3 px oscillation is magnified 11x (amplification factor 10), which we
verify by measuring apparent displacement spectrally.
"""

import numpy as np
from scipy.ndimage import fourier_shift

from msmmt import VideoClip, evm_magnify
from msmmt.imageops import gaussian_blur

rng = np.random.default_rng(0)
base = gaussian_blur(rng.random((64, 64)), 2.5)
base = (base - base.min()) / (base.max() - base.min()) * 0.4 + 0.3

fps, t_count, freq, amp = 30.0, 60, 2.0, 0.3
shifts = amp * np.sin(2 * np.pi * freq * np.arange(t_count) / fps)
frames = []
for dx in shifts:
    moved = np.fft.ifftn(fourier_shift(np.fft.fftn(base), (0.0, dx))).real
    frames.append(np.repeat(moved[..., None], 3, axis=2))
clip = VideoClip(
    np.clip(np.stack(frames), 0, 1).astype(np.float32),
    fps=fps, subject_id="demo", label=0, onset=0, apex=t_count // 2, offset=t_count - 1,
)

magnified = evm_magnify(clip, alpha=10.0, band=(0.4, 8.0), levels=4)


def measure_shift(ref, img):
    cross = np.fft.fft2(ref) * np.conj(np.fft.fft2(img))
    n = ref.shape[1]
    est, wsum = 0.0, 0.0
    for k in (1, 2, 3):
        c = cross[0, k]
        est += abs(c) * (np.angle(c) * n / (2 * np.pi * k))
        wsum += abs(c)
    return est / wsum


gray_in = clip.frames.mean(axis=3)
gray_out = magnified.frames.mean(axis=3)
m_in = np.array([measure_shift(gray_in[0], g) for g in gray_in])
m_out = np.array([measure_shift(gray_out[0], g) for g in gray_out])
drive = shifts - shifts[0]
print(f"input motion amplitude : {m_in @ drive / (drive @ drive) * amp:.3f} px")
print(f"output motion amplitude: {m_out @ drive / (drive @ drive) * amp:.3f} px")
print(f"amplification factor   : {m_out @ drive / (drive @ drive):.2f} (target 1 + alpha = 11)")
