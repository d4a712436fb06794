from dataclasses import replace

import numpy as np
import pytest

from subact import tensor as T
from subact.errors import CompatibilityError
from subact.labels import LabelMap, Vocabulary
from subact.model import ModelConfig, SubActionModel
from subact.objectives import LossWeights

LABELS = LabelMap(holistic={0: "walk then sit", 1: "sit then walk"}, sub={0: "none", 1: "walk", 2: "sit"})
VOCAB = Vocabulary.from_labels(LABELS)
CFG = ModelConfig(joints=3, frames=8, d_model=8, n_blocks=2, stride_blocks=(1,), text_layers=1, text_heads=2,
                  ff_mult=2, l_max=3, n_holistic=2, topology=((0, 1), (1, 2)))
MOTION = np.random.default_rng(0).normal(size=(2, 8, 3, 4))
SUB = np.array([[1, 2, 0], [2, 1, 0]])


def model(seed=0, **kw):
    m = SubActionModel(replace(CFG, **kw), VOCAB, LABELS, seed)
    m.eval()
    return m


def test_output_shapes():
    out = model()(MOTION, SUB, np.array([0, 1]))
    assert out.logits.shape == (2, 2)
    assert out.attention.shape == (2, 4, 4)
    assert out.t_sub.shape == (2, 3, 8) and out.t_hol.shape == (2, 8)


def test_state_dict_round_trip():
    a, b = model(0), model(1)
    assert not np.array_equal(a(MOTION, SUB).logits.data, b(MOTION, SUB).logits.data)
    b.load_state_dict(a.state_dict())
    np.testing.assert_array_equal(a(MOTION, SUB).logits.data, b(MOTION, SUB).logits.data)


def test_state_dict_is_a_copy():
    m = model()
    state = m.state_dict()
    state["classifier.head.bias"][...] = 99.0
    assert not np.any(m.classifier.head.bias.data == 99.0)


def test_strict_load_rejects_mismatch():
    state = model().state_dict()
    with pytest.raises(CompatibilityError):
        model(d_model=4, text_heads=2).load_state_dict(state)
    state["stray"] = np.zeros(1)
    with pytest.raises(CompatibilityError):
        model().load_state_dict(state)


def test_non_strict_reports_skipped():
    skipped = model(frames=16).load_state_dict(model().state_dict(), strict=False)
    assert skipped == ["mlp1.length_weight", "mlp1.length_bias"]


def test_bypass_ignores_sub_actions():
    m = model(fusion="bypass")
    a = m(MOTION, SUB).logits.data
    np.testing.assert_array_equal(a, m(MOTION, SUB[:, ::-1]).logits.data)
    assert m(MOTION, SUB).attention is None


def test_sub_action_order_matters_with_attention():
    m = model(qkv_init_std=0.5)
    assert not np.array_equal(m(MOTION, SUB).logits.data, m(MOTION, np.array([[2, 1, 0], [1, 2, 0]])).logits.data)


def test_holistic_count_checked():
    with pytest.raises(CompatibilityError):
        model(n_holistic=3)


def test_loss_without_semantic_term_has_no_mlp2_gradient():
    m = model()
    m.train()
    out = m(MOTION, SUB, np.array([0, 1]))
    total, _, l_sem = m.loss(out, np.array([0, 1]), LossWeights(1.0, 0.0))
    total.backward()
    assert l_sem is None
    assert all(p.grad is None or not np.any(p.grad) for _, p in m.mlp2.named_parameters())


def test_loss_composition():
    m = model()
    out = m(MOTION, SUB, np.array([0, 1]))
    total, recog, sem = m.loss(out, np.array([0, 1]), LossWeights(1.0, 0.5))
    assert abs(total.item() - (recog.item() + 0.5 * sem.item())) < 1e-15


def test_eval_forward_is_pure():
    m = model()
    with T.no_grad():
        first = m(MOTION, SUB).logits.data.copy()
        m(MOTION * 3, SUB)
        again = m(MOTION, SUB).logits.data
    np.testing.assert_array_equal(first, again)
