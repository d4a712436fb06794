import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from subact import tensor as T
from subact.errors import ConfigError, InputError
from subact.objectives import LossWeights, Mlp2, cosine_distance, recognition_loss, semantic_loss, total_loss


class IdentityMlp2(Mlp2):
    """MLP_2 stand-in that returns its single input row, to pin the cosine term."""

    def forward(self, t_sub):
        return T.as_tensor(t_sub)[..., 0, :]


def identity_mlp2():
    return IdentityMlp2(1, 3, np.random.default_rng(0), dropout=0.0)


class TestSemanticLoss:
    def test_identical(self):
        h = np.array([[1.0, 2.0, -0.5]])
        assert abs(semantic_loss(h[:, None, :], h, identity_mlp2()).item()) < 1e-15

    def test_antipodal(self):
        h = np.array([[1.0, 2.0, -0.5]])
        assert abs(semantic_loss(-h[:, None, :], h, identity_mlp2()).item() - 2.0) < 1e-15

    def test_orthogonal(self):
        assert semantic_loss(np.array([[[1.0, 0, 0]]]), np.array([[0, 3.0, 0]]), identity_mlp2()).item() == 1.0

    def test_zero_norm_guarded(self, caplog):
        with caplog.at_level(logging.WARNING):
            value = cosine_distance(np.zeros((1, 3)), np.array([[1.0, 0, 0]])).item()
        assert value == 1.0
        assert "zero-norm" in caplog.text

    def test_zero_norm_gradient_finite(self):
        z = T.Tensor(np.zeros((1, 3)), requires_grad=True)
        cosine_distance(z, np.array([[1.0, 0, 0]])).backward()
        assert np.all(np.isfinite(z.grad))

    @given(st.floats(1e-3, 1e3))
    def test_scale_invariant_in_target(self, c):
        rng = np.random.default_rng(0)
        z, h = rng.normal(size=(4, 5)), rng.normal(size=(4, 5))
        assert abs(cosine_distance(z, c * h).item() - cosine_distance(z, h).item()) < 1e-9

    def test_range(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            v = cosine_distance(rng.normal(size=(3, 4)), rng.normal(size=(3, 4))).item()
            assert 0.0 <= v <= 2.0

    def test_mlp2_is_linear(self):
        m = Mlp2(2, 3, np.random.default_rng(0), dropout=0.0)
        a, b = np.random.default_rng(1).normal(size=(2, 2, 3))
        f = lambda x: m(x[None]).data[0] - m(np.zeros((1, 2, 3))).data[0]  # noqa: E731
        np.testing.assert_allclose(f(a + 2 * b), f(a) + 2 * f(b), atol=1e-12)

    def test_gradient(self):
        rng = np.random.default_rng(2)
        m = Mlp2(3, 4, rng, dropout=0.0)
        t_sub = T.Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
        t_hol = T.Tensor(rng.normal(size=(2, 4)), requires_grad=True)
        assert T.grad_check(lambda: semantic_loss(t_sub, t_hol, m), [t_sub, t_hol, m.fc1.weight, m.fc2.bias]) < 1e-4


class TestRecognitionLoss:
    def test_uniform(self):
        assert abs(recognition_loss(np.zeros(4), 2).item() - math.log(4)) < 1e-15

    def test_large_margin(self):
        logits = np.zeros(4)
        logits[1] = 50.0
        assert recognition_loss(logits, 1).item() < 1e-20

    @given(st.floats(-100, 100))
    def test_shift_invariant(self, c):
        logits = np.array([[0.3, -1.0, 2.0]])
        assert abs(recognition_loss(logits + c, [2]).item() - recognition_loss(logits, [2]).item()) < 1e-12

    def test_batch_mean(self):
        logits = np.array([[0.0, 1.0], [2.0, -1.0]])
        single = [recognition_loss(logits[i], [y]).item() for i, y in enumerate([1, 0])]
        assert abs(recognition_loss(logits, [1, 0]).item() - sum(single) / 2) < 1e-15

    @pytest.mark.parametrize("y", [[4], [-1], [0.5], [0, 1]])
    def test_invalid_label(self, y):
        with pytest.raises(InputError):
            recognition_loss(np.zeros((1, 4)), np.array(y))

    def test_gradient(self):
        logits = T.Tensor(np.random.default_rng(0).normal(size=(3, 5)), requires_grad=True)
        assert T.grad_check(lambda: recognition_loss(logits, [0, 4, 2]), [logits]) < 1e-6


class TestTotalLoss:
    def test_recognition_only(self):
        assert total_loss(0.7, 123.0, LossWeights(2.0, 0.0)).item() == 1.4

    def test_arithmetic(self):
        assert total_loss(0.5, 0.25, LossWeights(1.0, 1.0)).item() == 0.75

    def test_defaults(self):
        assert LossWeights() == LossWeights(1.0, 0.5)

    @pytest.mark.parametrize("w", [(0.0, 0.0), (-1.0, 1.0), (1.0, -0.1)])
    def test_invalid_weights(self, w):
        with pytest.raises(ConfigError):
            LossWeights(*w)

    @given(st.floats(0, 5), st.floats(0, 5), st.floats(0, 5), st.floats(0, 5))
    def test_monotone(self, a, b, da, db):
        w = LossWeights(1.0, 0.5)
        assert total_loss(a + da, b + db, w).item() >= total_loss(a, b, w).item()

    def test_gradient_splits_linearly(self):
        rng = np.random.default_rng(4)
        p = T.Tensor(rng.normal(size=3), requires_grad=True)
        q = T.Tensor(rng.normal(size=3), requires_grad=True)

        def grads(l1, l2):
            p.grad = q.grad = None
            total_loss(T.tsum(p * p), T.tsum(T.exp(q)), LossWeights(l1, l2)).backward()
            return p.grad.copy(), q.grad.copy()

        gp, gq = grads(3.0, 0.25)
        np.testing.assert_allclose(gp, 3.0 * 2 * p.data, atol=1e-14)
        np.testing.assert_allclose(gq, 0.25 * np.exp(q.data), atol=1e-14)
