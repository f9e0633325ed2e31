"""Clip preprocessing: face alignment from eye-corner landmarks, cropping,
and training-time augmentation.

A :class:`VideoClip` is an aligned frame sequence (T x H x W x C, values in
[0, 1]) with subject id, class label, frame rate, and onset/apex/offset
indices. Landmarks follow the 68-point scheme; alignment uses the inner eye
corners (points 39 and 42) of the first frame and applies the same
similarity transform to every frame.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .imageops import warp_affine
from .tensorio import read_tensor, write_tensor

__all__ = [
    "VideoClip",
    "AlignmentError",
    "AugmentParams",
    "load_frames",
    "load_landmarks_csv",
    "align_and_crop",
    "draw_augment_params",
    "apply_augment",
    "augment",
    "save_clip",
    "load_clip",
]

INNER_EYE_LEFT = 39   # image-left eye, nose-side corner
INNER_EYE_RIGHT = 42  # image-right eye, nose-side corner

# canonical positions of the inner eye corners in the output frame,
# as fractions of width / height
EYE_X_LEFT = 0.35
EYE_X_RIGHT = 0.65
EYE_Y = 0.38
CROP_PAD = 0.05

MIN_EYE_DISTANCE_PX = 2.0


class AlignmentError(ValueError):
    """Landmarks are missing or degenerate for alignment."""


@dataclass
class VideoClip:
    """Aligned, cropped frame sequence with expression interval annotations."""

    frames: np.ndarray  # T x H x W x C, float32 in [0, 1]
    fps: float
    subject_id: str
    label: int
    onset: int
    apex: int
    offset: int
    landmarks: np.ndarray | None = field(default=None, repr=False)  # T x 68 x 2

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float32)
        if f.ndim == 3:
            f = f[..., None]
        if f.ndim != 4:
            raise ValueError(f"frames must be T x H x W x C, got shape {f.shape}")
        if f.shape[0] < 2:
            raise ValueError("a clip needs at least 2 frames")
        if not np.all(np.isfinite(f)):
            raise ValueError("clip contains non-finite pixels")
        if f.min() < 0.0 or f.max() > 1.0:
            raise ValueError("clip pixel values must lie in [0, 1]")
        if not (0 <= self.onset <= self.apex <= self.offset < f.shape[0]):
            raise ValueError(
                f"need onset <= apex <= offset < T, got "
                f"({self.onset}, {self.apex}, {self.offset}) with T={f.shape[0]}"
            )
        self.frames = f

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return self.frames.shape[1:]


def load_frames(path: str | Path) -> np.ndarray:
    """Read a frame sequence: either an .msmt tensor (T x H x W x C) or a
    directory of numbered PNG files. Values are returned in [0, 1]."""
    path = Path(path)
    if path.is_dir():
        try:
            from PIL import Image
        except ImportError as exc:
            raise ImportError(
                "reading PNG frame directories requires pillow "
                "(pip install pillow)"
            ) from exc
        files = sorted(path.glob("*.png"), key=lambda p: (len(p.stem), p.stem))
        if len(files) < 2:
            raise ValueError(f"{path}: need at least 2 PNG frames, found {len(files)}")
        frames = []
        for f in files:
            arr = np.asarray(Image.open(f).convert("RGB"), dtype=np.float32) / 255.0
            frames.append(arr)
        stack = np.stack(frames)
        if any(fr.shape != stack[0].shape for fr in stack):
            raise ValueError(f"{path}: frames differ in size")
        return stack
    frames = read_tensor(path)
    if frames.ndim == 3:
        frames = frames[..., None]
    if frames.ndim != 4:
        raise ValueError(f"{path}: expected T x H x W x C frames, got {frames.shape}")
    return frames


def load_landmarks_csv(path: str | Path, num_frames: int | None = None) -> np.ndarray:
    """Read per-frame landmarks from CSV (one row per frame, 136 columns)."""
    rows = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    if rows.shape[1] != 136:
        raise ValueError(
            f"{path}: expected 136 columns (68 x/y pairs), got {rows.shape[1]}"
        )
    if num_frames is not None and rows.shape[0] != num_frames:
        raise ValueError(
            f"{path}: {rows.shape[0]} landmark rows for {num_frames} frames"
        )
    return rows.reshape(rows.shape[0], 68, 2)


def _similarity_from_two_points(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """2x3 rotation+scale+translation mapping two source points onto two targets."""
    z1, z2 = complex(*src[0]), complex(*src[1])
    w1, w2 = complex(*dst[0]), complex(*dst[1])
    s = (w2 - w1) / (z2 - z1)
    t = w1 - s * z1
    return np.array(
        [[s.real, -s.imag, t.real], [s.imag, s.real, t.imag]], dtype=np.float64
    )


def _apply_affine_points(matrix: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return pts @ matrix[:, :2].T + matrix[:, 2]


def align_and_crop(
    frames: np.ndarray,
    landmarks: np.ndarray,
    out_size: tuple[int, int],
    fps: float = 30.0,
    subject_id: str = "",
    label: int = 0,
    onset: int = 0,
    apex: int | None = None,
    offset: int | None = None,
) -> VideoClip:
    """Align a frame sequence on the first frame's inner eye corners and crop.

    The similarity transform that moves the first frame's inner eye corners
    to canonical positions is composed with a crop of the transformed
    landmark bounding box (padded by 5%) resized to ``out_size``, and the
    combined map is applied to every frame with one bilinear resampling.
    """
    frames = np.asarray(frames, dtype=np.float32)
    if frames.ndim == 3:
        frames = frames[..., None]
    landmarks = np.asarray(landmarks, dtype=np.float64)
    if landmarks.ndim == 2:
        landmarks = np.broadcast_to(landmarks, (frames.shape[0],) + landmarks.shape).copy()
    if landmarks.shape != (frames.shape[0], 68, 2):
        raise AlignmentError(
            f"landmarks shape {landmarks.shape} does not match "
            f"{frames.shape[0]} frames x 68 points"
        )
    if not np.all(np.isfinite(landmarks[0])):
        raise AlignmentError("missing landmarks in the first frame")

    eyes = landmarks[0, [INNER_EYE_LEFT, INNER_EYE_RIGHT]]
    if np.linalg.norm(eyes[1] - eyes[0]) < MIN_EYE_DISTANCE_PX:
        raise AlignmentError("degenerate eye distance")

    h, w = frames.shape[1:3]
    targets = np.array([[EYE_X_LEFT * w, EYE_Y * h], [EYE_X_RIGHT * w, EYE_Y * h]])
    align_m = _similarity_from_two_points(eyes, targets)

    # crop rectangle: padded bounding box of the aligned first-frame landmarks
    moved = _apply_affine_points(align_m, landmarks[0])
    x0, y0 = moved.min(axis=0)
    x1, y1 = moved.max(axis=0)
    pad_x, pad_y = CROP_PAD * (x1 - x0), CROP_PAD * (y1 - y0)
    x0, x1 = x0 - pad_x, x1 + pad_x
    y0, y1 = y0 - pad_y, y1 + pad_y
    if x1 <= x0 or y1 <= y0:
        raise AlignmentError("degenerate landmark bounding box")

    out_h, out_w = out_size
    sx, sy = out_w / (x1 - x0), out_h / (y1 - y0)
    crop_m = np.array([[sx, 0.0, -x0 * sx], [0.0, sy, -y0 * sy]])
    full = np.vstack([crop_m, [0, 0, 1]]) @ np.vstack([align_m, [0, 0, 1]])
    full_m = full[:2]

    warped = np.stack(
        [warp_affine(fr, full_m, out_shape=(out_h, out_w)) for fr in frames]
    )
    warped = np.clip(warped, 0.0, 1.0)
    out_lm = np.stack([_apply_affine_points(full_m, lm) for lm in landmarks])

    t = frames.shape[0]
    return VideoClip(
        frames=warped,
        fps=fps,
        subject_id=subject_id,
        label=label,
        onset=onset,
        apex=apex if apex is not None else (t - 1) // 2,
        offset=offset if offset is not None else t - 1,
        landmarks=out_lm,
    )


@dataclass(frozen=True)
class AugmentParams:
    angle_deg: float
    scale: float
    flip: bool


def draw_augment_params(
    rng: np.random.Generator,
    rotation_range: tuple[float, float] = (-10.0, 10.0),
    scale_range: tuple[float, float] = (0.9, 1.1),
    flip_prob: float = 0.5,
) -> AugmentParams:
    return AugmentParams(
        angle_deg=float(rng.uniform(*rotation_range)),
        scale=float(rng.uniform(*scale_range)),
        flip=bool(rng.random() < flip_prob),
    )


def apply_augment(clip: VideoClip, params: AugmentParams) -> VideoClip:
    """Apply one rotation/scale/flip combination identically to every frame."""
    t, h, w = clip.frames.shape[:3]
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    theta = np.deg2rad(params.angle_deg)
    c, s = np.cos(theta) * params.scale, np.sin(theta) * params.scale
    fx = -1.0 if params.flip else 1.0
    # rotate+scale about the center, with optional horizontal mirror first
    a = np.array([[c * fx, -s, 0.0], [s * fx, c, 0.0]])
    a[:, 2] = [cx - a[0, 0] * cx - a[0, 1] * cy, cy - a[1, 0] * cx - a[1, 1] * cy]
    frames = np.stack([warp_affine(fr, a) for fr in clip.frames])
    frames = np.clip(frames, 0.0, 1.0)
    lm = None
    if clip.landmarks is not None:
        lm = np.stack([_apply_affine_points(a, p) for p in clip.landmarks])
    return replace(clip, frames=frames, landmarks=lm)


def augment(
    clip: VideoClip,
    seed: int,
    rotation_range: tuple[float, float] = (-10.0, 10.0),
    scale_range: tuple[float, float] = (0.9, 1.1),
    flip_prob: float = 0.5,
) -> VideoClip:
    """Randomly parameterized rotation/flip/scale, deterministic under ``seed``."""
    rng = np.random.default_rng(seed)
    params = draw_augment_params(rng, rotation_range, scale_range, flip_prob)
    return apply_augment(clip, params)


def save_clip(clip: VideoClip, path: str | Path) -> None:
    """Write frames as an .msmt tensor plus a JSON metadata sidecar."""
    path = Path(path)
    write_tensor(path, clip.frames)
    meta = {
        "subject_id": clip.subject_id,
        "label": int(clip.label),
        "fps": float(clip.fps),
        "onset": int(clip.onset),
        "apex": int(clip.apex),
        "offset": int(clip.offset),
    }
    sidecar = path.with_suffix(path.suffix + ".json")
    tmp = sidecar.with_name(sidecar.name + ".tmp")
    tmp.write_text(json.dumps(meta, indent=2, sort_keys=True))
    os.replace(tmp, sidecar)


def load_clip(path: str | Path) -> VideoClip:
    path = Path(path)
    frames = read_tensor(path)
    sidecar = path.with_suffix(path.suffix + ".json")
    meta = json.loads(sidecar.read_text())
    return VideoClip(
        frames=frames,
        fps=float(meta["fps"]),
        subject_id=str(meta["subject_id"]),
        label=int(meta["label"]),
        onset=int(meta["onset"]),
        apex=int(meta["apex"]),
        offset=int(meta["offset"]),
    )
