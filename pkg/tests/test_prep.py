import numpy as np
import pytest

from msmmt.imageops import gaussian_blur, warp_affine
from msmmt.prep import (
    INNER_EYE_LEFT,
    INNER_EYE_RIGHT,
    AlignmentError,
    VideoClip,
    align_and_crop,
    apply_augment,
    augment,
    draw_augment_params,
    AugmentParams,
    load_clip,
    load_landmarks_csv,
    save_clip,
)


def synthetic_face(seed=0, size=96):
    """Smoothed-noise 'face' with a plausible 68-point landmark layout."""
    rng = np.random.default_rng(seed)
    img = gaussian_blur(rng.random((size, size, 3)), 3.0)
    lo = img.min(axis=(0, 1), keepdims=True)
    hi = img.max(axis=(0, 1), keepdims=True)
    img = (img - lo) / (hi - lo) * 0.8 + 0.1
    # landmarks on an ellipse around the center with the eye corners pinned
    angles = np.linspace(0, 2 * np.pi, 68, endpoint=False)
    pts = np.stack(
        [size / 2 + size * 0.28 * np.cos(angles), size / 2 + size * 0.3 * np.sin(angles)],
        axis=1,
    )
    pts[INNER_EYE_LEFT] = [size * 0.40, size * 0.42]
    pts[INNER_EYE_RIGHT] = [size * 0.60, size * 0.42]
    return img.astype(np.float32), pts


def make_clip_frames(img, t=4):
    return np.stack([img] * t)


class TestVideoClip:
    def test_validation(self):
        frames = np.zeros((4, 8, 8, 3), dtype=np.float32)
        clip = VideoClip(frames, fps=30, subject_id="a", label=0, onset=0, apex=2, offset=3)
        assert clip.num_frames == 4

    def test_one_frame_rejected(self):
        with pytest.raises(ValueError):
            VideoClip(np.zeros((1, 8, 8, 3)), 30, "a", 0, 0, 0, 0)

    def test_interval_order_enforced(self):
        with pytest.raises(ValueError):
            VideoClip(np.zeros((4, 8, 8, 3)), 30, "a", 0, 2, 1, 3)

    def test_out_of_range_pixels_rejected(self):
        with pytest.raises(ValueError):
            VideoClip(np.full((2, 4, 4, 3), 1.5), 30, "a", 0, 0, 0, 1)

    def test_round_trip_files(self, tmp_path):
        rng = np.random.default_rng(0)
        frames = rng.random((3, 6, 6, 3)).astype(np.float32)
        clip = VideoClip(frames, fps=25.0, subject_id="s7", label=2, onset=0, apex=1, offset=2)
        save_clip(clip, tmp_path / "c.msmt")
        back = load_clip(tmp_path / "c.msmt")
        np.testing.assert_array_equal(back.frames, clip.frames)
        assert (back.subject_id, back.label, back.fps) == ("s7", 2, 25.0)
        assert (back.onset, back.apex, back.offset) == (0, 1, 2)


class TestLandmarksCSV:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        lm = rng.random((3, 68, 2)) * 90
        path = tmp_path / "lm.csv"
        np.savetxt(path, lm.reshape(3, 136), delimiter=",")
        back = load_landmarks_csv(path, num_frames=3)
        np.testing.assert_allclose(back, lm, atol=1e-10)

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "lm.csv"
        np.savetxt(path, np.zeros((2, 10)), delimiter=",")
        with pytest.raises(ValueError, match="136"):
            load_landmarks_csv(path)

    def test_frame_count_mismatch(self, tmp_path):
        path = tmp_path / "lm.csv"
        np.savetxt(path, np.zeros((2, 136)), delimiter=",")
        with pytest.raises(ValueError, match="rows"):
            load_landmarks_csv(path, num_frames=5)


class TestAlignAndCrop:
    def test_idempotent_within_interpolation(self):
        img, pts = synthetic_face(0)
        frames = make_clip_frames(img)
        clip1 = align_and_crop(frames, pts, out_size=(64, 64))
        clip2 = align_and_crop(clip1.frames, clip1.landmarks, out_size=(64, 64))
        rms = np.sqrt(np.mean((clip2.frames - clip1.frames) ** 2))
        assert rms < 1e-2

    def test_rotated_face_comes_back_level(self):
        img, pts = synthetic_face(1)
        size = img.shape[0]
        theta = np.deg2rad(10.0)
        c, s = np.cos(theta), np.sin(theta)
        cx = cy = (size - 1) / 2
        rot = np.array([[c, -s, cx - c * cx + s * cy], [s, c, cy - s * cx - c * cy]])
        rot_img = warp_affine(img, rot)
        rot_pts = pts @ rot[:, :2].T + rot[:, 2]
        clip = align_and_crop(make_clip_frames(rot_img), rot_pts, out_size=(64, 64))
        eyes = clip.landmarks[0, [INNER_EYE_LEFT, INNER_EYE_RIGHT]]
        seg = eyes[1] - eyes[0]
        angle = np.rad2deg(np.arctan2(seg[1], seg[0]))
        assert abs(angle) < 0.5

    def test_same_transform_every_frame(self):
        img, pts = synthetic_face(2)
        # second frame differs in content; alignment must come from frame 0 only
        frames = np.stack([img, np.clip(img * 0.5, 0, 1)])
        clip = align_and_crop(frames, pts, out_size=(48, 48))
        np.testing.assert_allclose(clip.landmarks[0], clip.landmarks[1], atol=1e-9)

    def test_degenerate_eye_distance(self):
        img, pts = synthetic_face(3)
        pts[INNER_EYE_RIGHT] = pts[INNER_EYE_LEFT] + [0.5, 0.0]
        with pytest.raises(AlignmentError, match="degenerate eye distance"):
            align_and_crop(make_clip_frames(img), pts, out_size=(64, 64))

    def test_missing_landmarks(self):
        img, pts = synthetic_face(4)
        pts[INNER_EYE_LEFT] = np.nan
        with pytest.raises(AlignmentError, match="missing"):
            align_and_crop(make_clip_frames(img), pts, out_size=(64, 64))

    def test_output_range_and_shape(self):
        img, pts = synthetic_face(5)
        clip = align_and_crop(make_clip_frames(img), pts, out_size=(32, 48))
        assert clip.frames.shape == (4, 32, 48, 3)
        assert clip.frames.min() >= 0.0 and clip.frames.max() <= 1.0
        assert np.isfinite(clip.frames).all()


class TestAugment:
    def make_clip(self, seed=0):
        img, _ = synthetic_face(seed, size=48)
        return VideoClip(make_clip_frames(img), 30.0, "s", 0, 0, 1, 3)

    def test_deterministic_under_seed(self):
        clip = self.make_clip()
        a = augment(clip, seed=42)
        b = augment(clip, seed=42)
        np.testing.assert_array_equal(a.frames, b.frames)

    def test_different_seeds_differ(self):
        clip = self.make_clip()
        a = augment(clip, seed=1)
        b = augment(clip, seed=2)
        assert not np.array_equal(a.frames, b.frames)

    def test_flip_is_involution(self):
        clip = self.make_clip()
        params = AugmentParams(angle_deg=0.0, scale=1.0, flip=True)
        once = apply_augment(clip, params)
        twice = apply_augment(once, params)
        np.testing.assert_allclose(twice.frames, clip.frames, atol=1e-5)

    def test_rotation_bounds_over_1000_seeds(self):
        angles = [
            draw_augment_params(np.random.default_rng(s)).angle_deg for s in range(1000)
        ]
        assert min(angles) >= -10.0 and max(angles) <= 10.0
        assert min(angles) < -8.0 and max(angles) > 8.0  # the range is exercised

    def test_same_transform_on_all_frames(self):
        img, _ = synthetic_face(6, size=48)
        frames = np.stack([img] * 3)
        clip = VideoClip(frames, 30.0, "s", 0, 0, 1, 2)
        out = augment(clip, seed=5)
        np.testing.assert_array_equal(out.frames[0], out.frames[1])
        np.testing.assert_array_equal(out.frames[0], out.frames[2])

    def test_output_stays_valid(self):
        clip = self.make_clip(7)
        out = augment(clip, seed=9)
        assert out.frames.min() >= 0.0 and out.frames.max() <= 1.0
        assert out.frames.shape == clip.frames.shape


class TestLoadFrames:
    def test_png_directory(self, tmp_path):
        from PIL import Image

        from msmmt.prep import load_frames

        rng = np.random.default_rng(0)
        frames = (rng.random((3, 12, 10, 3)) * 255).astype(np.uint8)
        for i, fr in enumerate(frames):
            Image.fromarray(fr).save(tmp_path / f"{i:03d}.png")
        loaded = load_frames(tmp_path)
        assert loaded.shape == (3, 12, 10, 3)
        np.testing.assert_allclose(loaded, frames / 255.0, atol=1e-6)

    def test_numeric_ordering(self, tmp_path):
        from PIL import Image

        from msmmt.prep import load_frames

        # 2.png must come before 10.png despite lexicographic order
        for i, val in ((2, 50), (10, 200)):
            arr = np.full((4, 4, 3), val, dtype=np.uint8)
            Image.fromarray(arr).save(tmp_path / f"{i}.png")
        loaded = load_frames(tmp_path)
        assert loaded[0].mean() < loaded[1].mean()

    def test_msmt_file(self, tmp_path):
        from msmmt.prep import load_frames
        from msmmt.tensorio import write_tensor

        rng = np.random.default_rng(1)
        frames = rng.random((4, 6, 6, 3)).astype(np.float32)
        write_tensor(tmp_path / "c.msmt", frames)
        np.testing.assert_array_equal(load_frames(tmp_path / "c.msmt"), frames)

    def test_too_few_frames(self, tmp_path):
        from PIL import Image

        from msmmt.prep import load_frames

        Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(tmp_path / "0.png")
        with pytest.raises(ValueError, match="at least 2"):
            load_frames(tmp_path)
