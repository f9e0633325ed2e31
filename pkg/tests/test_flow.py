import numpy as np
import pytest

from msmmt.flow import FlowField, TVL1Params, compose_flow_os, strain, tvl1_flow
from msmmt.imageops import gaussian_blur, translate
from msmmt.tensorio import read_tensor, write_tensor


def smoothed_noise(seed=0, size=64, sigma=2.0):
    rng = np.random.default_rng(seed)
    img = gaussian_blur(rng.random((size, size)), sigma)
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


class TestTVL1:
    def test_identical_frames_zero_flow(self):
        img = smoothed_noise(0)
        field = tvl1_flow(img, img)
        assert np.abs(field.u).max() < 1e-3
        assert np.abs(field.v).max() < 1e-3

    def test_known_translation(self):
        img = smoothed_noise(1)
        moved = translate(img, 3.0, -2.0)
        field = tvl1_flow(img, moved)
        interior = (slice(4, -4), slice(4, -4))
        epe = np.sqrt((field.u[interior] - 3.0) ** 2 + (field.v[interior] + 2.0) ** 2)
        assert epe.mean() < 0.3

    def test_residual_improves(self):
        img = smoothed_noise(2)
        moved = translate(img, 2.0, 1.0)
        field = tvl1_flow(img, moved)
        from msmmt.imageops import warp_displacement

        before = np.abs(moved - img).mean()
        after = np.abs(warp_displacement(moved, field.u, field.v) - img).mean()
        assert after < before

    def test_horizontal_flip_negates_u(self):
        img = smoothed_noise(3)
        moved = translate(img, 3.0, -2.0)
        field = tvl1_flow(img, moved)
        field_f = tvl1_flow(img[:, ::-1], moved[:, ::-1])
        interior = (slice(4, -4), slice(4, -4))
        a = field_f.u[interior].ravel()
        b = -field.u[:, ::-1][interior].ravel()
        corr = np.corrcoef(a, b)[0, 1]
        assert corr > 0.95

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            tvl1_flow(np.zeros((16, 16)), np.zeros((16, 17)))

    def test_tiny_image_rejected(self):
        with pytest.raises(ValueError, match="below"):
            tvl1_flow(np.zeros((4, 4)), np.zeros((4, 4)))

    def test_nonfinite_flow_rejected(self):
        with pytest.raises(ValueError):
            FlowField(u=np.full((4, 4), np.nan), v=np.zeros((4, 4)))


class TestStrain:
    def test_rigid_translation_zero_strain(self):
        flow = FlowField(u=np.full((12, 12), 5.0), v=np.full((12, 12), 5.0))
        s = strain(flow)
        assert np.abs(s.eps).max() < 1e-6

    def test_affine_field(self):
        yy, xx = np.meshgrid(np.arange(20.0), np.arange(20.0), indexing="ij")
        flow = FlowField(u=0.1 * xx, v=np.zeros((20, 20)))
        s = strain(flow)
        interior = (slice(1, -1), slice(1, -1))
        np.testing.assert_allclose(s.eps_xx[interior], 0.1, atol=1e-4)
        np.testing.assert_allclose(s.eps_xy[interior], 0.0, atol=1e-4)
        np.testing.assert_allclose(s.eps[interior], 0.1, atol=1e-4)

    def test_magnitude_recomposition(self):
        rng = np.random.default_rng(0)
        u = gaussian_blur(rng.random((24, 24)), 2.0)
        v = gaussian_blur(rng.random((24, 24)), 2.0)
        s = strain(FlowField(u=u, v=v))
        recomposed = np.sqrt(s.eps_xx**2 + s.eps_yy**2 + s.eps_xy**2 + s.eps_yx**2)
        np.testing.assert_allclose(s.eps, recomposed, atol=1e-6)

    def test_constant_offset_invariance(self):
        rng = np.random.default_rng(1)
        u = gaussian_blur(rng.random((16, 16)), 1.5)
        v = gaussian_blur(rng.random((16, 16)), 1.5)
        s0 = strain(FlowField(u=u, v=v))
        s1 = strain(FlowField(u=u + 7.3, v=v - 2.1))
        np.testing.assert_allclose(s0.eps, s1.eps, atol=1e-10)


class TestComposeFlowOS:
    def test_degenerate_channels_become_half(self):
        flow = FlowField(u=np.zeros((8, 8)), v=np.zeros((8, 8)))
        img = compose_flow_os(flow, strain(flow))
        np.testing.assert_array_equal(img, 0.5)

    def test_channel_normalization_tracks_extremes(self):
        rng = np.random.default_rng(2)
        u = rng.normal(size=(10, 10))
        v = rng.normal(size=(10, 10))
        flow = FlowField(u=u, v=v)
        img = compose_flow_os(flow, strain(flow))
        assert img[..., 0].argmin() == u.argmin()
        assert img[..., 0].argmax() == u.argmax()
        assert img[..., 0].min() == 0.0 and img[..., 0].max() == 1.0
        assert img.shape == (10, 10, 3)
        assert img.min() >= 0.0 and img.max() <= 1.0

    def test_msmt_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        flow = FlowField(u=rng.normal(size=(6, 6)), v=rng.normal(size=(6, 6)))
        img = compose_flow_os(flow, strain(flow))
        p = tmp_path / "f.msmt"
        write_tensor(p, img)
        back = read_tensor(p)
        assert np.array_equal(back.view(np.uint32), img.view(np.uint32))

    def test_shape_mismatch(self):
        flow = FlowField(u=np.zeros((8, 8)), v=np.zeros((8, 8)))
        s = strain(FlowField(u=np.zeros((9, 9)), v=np.zeros((9, 9))))
        with pytest.raises(ValueError):
            compose_flow_os(flow, s)


class TestParams:
    def test_levels_clamped_to_image(self):
        img = smoothed_noise(4, size=32)
        moved = translate(img, 1.0, 0.0)
        field = tvl1_flow(img, moved, TVL1Params(levels=10))
        assert np.isfinite(field.u).all()

    def test_explicit_none_levels(self):
        img = smoothed_noise(5, size=16)
        field = tvl1_flow(img, img, TVL1Params(levels=None))
        assert np.abs(field.u).max() < 1e-3
