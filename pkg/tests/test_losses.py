import numpy as np
import pytest

from msmmt.autodiff import Tensor
from msmmt.losses import (
    ContrastiveBatch,
    contrastive_anchor_loss,
    contrastive_loss,
    cosine_sim,
    cross_entropy,
    total_loss,
)
from helpers import gradcheck


def naive_contrastive(dy, flowos, tau):
    """Direct double-loop evaluation of the symmetrized pairing loss."""

    def cos(a, b):
        return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))

    b = dy.shape[0]
    total = 0.0
    for i in range(b):
        num = np.exp(cos(dy[i], flowos[i]) / tau)
        den = sum(np.exp(cos(dy[i], flowos[k]) / tau) for k in range(b) if k != i)
        den += sum(np.exp(cos(dy[k], flowos[i]) / tau) for k in range(b))
        total += -np.log(num / den)
        num2 = np.exp(cos(flowos[i], dy[i]) / tau)
        den2 = sum(np.exp(cos(flowos[i], dy[k]) / tau) for k in range(b) if k != i)
        den2 += sum(np.exp(cos(flowos[k], dy[i]) / tau) for k in range(b))
        total += -np.log(num2 / den2)
    return total / (2 * b)


class TestCosine:
    def test_self_similarity(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.normal(size=6)
            assert abs(cosine_sim(x, x) - 1.0) < 1e-12

    def test_orthogonal(self):
        assert cosine_sim([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_antiparallel(self):
        x = np.array([0.3, -2.0, 1.1])
        assert abs(cosine_sim(x, -x) + 1.0) < 1e-12

    def test_zero_vector_errors(self):
        with pytest.raises(ValueError, match="zero"):
            cosine_sim(np.zeros(3), np.ones(3))


class TestContrastive:
    def test_b1_is_exactly_zero(self):
        rng = np.random.default_rng(1)
        dy = rng.normal(size=(1, 8))
        fl = rng.normal(size=(1, 8))
        assert contrastive_loss(dy, fl, 0.1).item() == 0.0
        batch = ContrastiveBatch(dy, fl, 0.1)
        assert contrastive_anchor_loss(batch, 0, "dy") == 0.0

    @pytest.mark.parametrize("b", [1, 2, 4, 8])
    def test_identical_features_collapse(self, b):
        feat = np.tile(np.array([0.5, -1.0, 2.0]), (b, 1))
        loss = contrastive_loss(feat, feat.copy(), 0.1).item()
        assert abs(loss - np.log(2 * b - 1)) < 1e-6

    @pytest.mark.parametrize("b", [1, 2, 4, 8])
    def test_matches_naive_loop(self, b):
        rng = np.random.default_rng(b)
        dy = rng.normal(size=(b, 8))
        fl = rng.normal(size=(b, 8))
        vec = contrastive_loss(dy, fl, 0.1).item()
        assert abs(vec - naive_contrastive(dy, fl, 0.1)) < 1e-6

    def test_anchor_terms_match_naive(self):
        rng = np.random.default_rng(9)
        dy = rng.normal(size=(4, 8))
        fl = rng.normal(size=(4, 8))
        batch = ContrastiveBatch(dy, fl, 0.1)
        total = sum(
            contrastive_anchor_loss(batch, i, m)
            for i in range(4)
            for m in ("dy", "flowos")
        ) / 8.0
        assert abs(total - naive_contrastive(dy, fl, 0.1)) < 1e-9

    def test_modality_swap_symmetry(self):
        rng = np.random.default_rng(2)
        dy = rng.normal(size=(5, 7))
        fl = rng.normal(size=(5, 7))
        a = contrastive_loss(dy, fl, 0.07).item()
        b = contrastive_loss(fl, dy, 0.07).item()
        assert abs(a - b) < 1e-7

    def test_row_rescaling_invariance(self):
        rng = np.random.default_rng(3)
        dy = rng.normal(size=(4, 6))
        fl = rng.normal(size=(4, 6))
        scales = rng.uniform(0.1, 10.0, size=(4, 1))
        a = contrastive_loss(dy, fl, 0.1).item()
        b = contrastive_loss(dy * scales, fl, 0.1).item()
        assert abs(a - b) < 1e-9

    def test_non_negative(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            dy = rng.normal(size=(3, 5))
            fl = rng.normal(size=(3, 5))
            assert contrastive_loss(dy, fl, 0.1).item() >= 0.0

    def test_invalid_temperature(self):
        with pytest.raises(ValueError):
            contrastive_loss(np.ones((2, 3)), np.ones((2, 3)), 0.0)
        with pytest.raises(ValueError):
            ContrastiveBatch(np.ones((2, 3)), np.ones((2, 3)), -1.0)

    def test_zero_feature_vector_errors(self):
        feats = np.ones((2, 3))
        feats[0] = 0.0
        with pytest.raises(ValueError, match="zero"):
            contrastive_loss(feats, np.ones((2, 3)), 0.1)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        dy = rng.normal(size=(3, 6))
        fl = rng.normal(size=(3, 6))
        gradcheck(lambda a, b: contrastive_loss(a, b, 0.2), [dy, fl], tol=1e-5)


class TestCrossEntropy:
    def test_uniform_logits(self):
        for c in (2, 3, 7):
            logits = np.zeros((4, c))
            labels = np.arange(4) % c
            loss = cross_entropy(logits, labels).item()
            assert abs(loss - np.log(c)) < 1e-6

    def test_confident_correct_is_near_zero(self):
        logits = np.full((2, 3), -50.0)
        logits[0, 1] = 50.0
        logits[1, 2] = 50.0
        assert cross_entropy(logits, np.array([1, 2])).item() < 1e-6

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            logits = rng.normal(size=(5, 4)) * 3
            labels = rng.integers(0, 4, size=5)
            total = 0.0
            for i in range(5):
                e = np.exp(logits[i] - logits[i].max())
                total += -np.log(e[labels[i]] / e.sum())
            assert abs(cross_entropy(logits, labels).item() - total / 5) < 1e-7

    def test_label_out_of_range(self):
        with pytest.raises(ValueError, match="labels"):
            cross_entropy(np.zeros((2, 3)), np.array([0, 3]))

    def test_huge_logits_stable(self):
        logits = np.array([[1e4, 0.0, -1e4]])
        val = cross_entropy(logits, np.array([0])).item()
        assert np.isfinite(val) and val < 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient(self, seed):
        rng = np.random.default_rng(10 + seed)
        logits = rng.normal(size=(4, 3))
        labels = rng.integers(0, 3, size=4)
        gradcheck(lambda z: cross_entropy(z, labels), [logits], tol=1e-5)


class TestTotalLoss:
    def test_endpoints_exact(self):
        assert total_loss(3.7, 1.2, 1.0) == 3.7
        assert total_loss(3.7, 1.2, 0.0) == 1.2

    def test_blend(self):
        assert abs(total_loss(2.0, 1.0, 0.1) - (0.9 * 1.0 + 0.1 * 2.0)) < 1e-12

    def test_monotone_in_components(self):
        base = total_loss(1.0, 1.0, 0.3)
        assert total_loss(2.0, 1.0, 0.3) > base
        assert total_loss(1.0, 2.0, 0.3) > base

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            total_loss(1.0, 1.0, 1.5)
        with pytest.raises(ValueError):
            total_loss(1.0, 1.0, -0.1)

    def test_tensor_blend_differentiable(self):
        ce = Tensor(np.array(2.0), requires_grad=True, dtype=np.float64)
        con = Tensor(np.array(5.0), requires_grad=True, dtype=np.float64)
        total_loss(ce, con, 0.25).backward()
        assert abs(ce.grad - 0.25) < 1e-12
        assert abs(con.grad - 0.75) < 1e-12
