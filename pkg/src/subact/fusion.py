"""Cross-modal fusion of motion tokens with sub-action features, and the classification head."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import ConfigError, DimensionError
from .tensor.nn import BatchNorm, Dropout, LayerNorm, Linear, Module

VARIANTS = ("cross_attention", "cross_attention_no_residual", "add", "mul", "mul_residual", "concat", "bypass")
ATTENTION_VARIANTS = ("cross_attention", "cross_attention_no_residual")


class Mlp1(Module):
    """Channel MLP (affine, batch norm, ReLU, dropout, affine) then a learned map from L sub-action rows to T' rows."""

    def __init__(self, d_model: int, l_max: int, t_out: int, rng: np.random.Generator, dropout: float = 0.1):
        self.fc1 = Linear(d_model, d_model, rng)
        self.bn = BatchNorm(d_model)
        self.drop = Dropout(dropout)
        self.fc2 = Linear(d_model, d_model, rng)
        self.l_max, self.t_out = l_max, t_out
        # start as a nearest-row stretch of the sub-action axis onto the timeline
        stretch = np.zeros((l_max, t_out))
        stretch[(np.arange(t_out) * l_max) // t_out, np.arange(t_out)] = 1.0
        self.length_weight = T.Parameter(stretch, init_spec="nearest-stretch")
        self.length_bias = T.Parameter(np.zeros(t_out), init_spec="zeros")

    def forward(self, t_sub) -> T.Tensor:
        t_sub = T.as_tensor(t_sub)
        squeeze = t_sub.ndim == 2
        if squeeze:
            t_sub = t_sub.reshape((1,) + t_sub.shape)
        if t_sub.shape[1] != self.l_max or t_sub.shape[2] != self.fc1.weight.shape[0]:
            raise DimensionError(f"mlp1: expected (batch, {self.l_max}, {self.fc1.weight.shape[0]}), got {t_sub.shape}")
        h = self.fc2(self.drop(T.relu(self.bn(self.fc1(t_sub)))))
        out = (T.matmul(h.swapaxes(1, 2), self.length_weight) + self.length_bias).swapaxes(1, 2)
        return out[0] if squeeze else out


def mlp1_project(t_sub, mlp: Mlp1) -> T.Tensor:
    return mlp(t_sub)


class CrossAttention(Module):
    """Queries from motion tokens, keys and values from projected sub-action features."""

    def __init__(self, d_model: int, d_k: int, rng: np.random.Generator, residual: bool = True, init_std: float = 1e-3):
        if d_k <= 0:
            raise ConfigError("d_k must be positive")
        self.d_k = d_k
        self.residual = residual
        self.w_q = T.Parameter(rng.normal(0.0, init_std, size=(d_model, d_k)), init_spec=f"normal(0, {init_std:g})")
        self.w_k = T.Parameter(rng.normal(0.0, init_std, size=(d_model, d_k)), init_spec=f"normal(0, {init_std:g})")
        self.w_v = T.Parameter(rng.normal(0.0, init_std, size=(d_model, d_model)), init_spec=f"normal(0, {init_std:g})")
        self.norm = LayerNorm(d_model)

    def forward(self, x, tm) -> tuple[T.Tensor, T.Tensor]:
        x, tm = T.as_tensor(x), T.as_tensor(tm)
        if x.shape[-1] != self.w_q.shape[0] or tm.shape[-1] != self.w_k.shape[0]:
            raise DimensionError(f"cross attention: widths {x.shape[-1]} / {tm.shape[-1]} do not match projections")
        q = T.matmul(x, self.w_q)
        k = T.matmul(tm, self.w_k)
        v = T.matmul(tm, self.w_v)
        attn = T.softmax(T.matmul(q, k.swapaxes(-1, -2)) * (1.0 / np.sqrt(self.d_k)), axis=-1)
        mixed = T.matmul(attn, v)
        return self.norm(x + mixed if self.residual else mixed), attn


def cross_attention_fuse(x, tm, fusion: CrossAttention) -> tuple[T.Tensor, T.Tensor]:
    return fusion(x, tm)


class Fusion(Module):
    """One of the fusion variants; attention variants also return their weights."""

    def __init__(self, variant: str, d_model: int, d_k: int, rng: np.random.Generator, init_std: float = 1e-3):
        if variant not in VARIANTS:
            raise ConfigError(f"unknown fusion variant {variant!r}; choose from {VARIANTS}")
        self.variant = variant
        self.attention = None
        self.proj = None
        self.norm = None
        if variant in ATTENTION_VARIANTS:
            self.attention = CrossAttention(d_model, d_k, rng, residual=variant == "cross_attention", init_std=init_std)
        else:
            self.norm = LayerNorm(d_model)
            if variant == "concat":
                self.proj = Linear(2 * d_model, d_model, rng)

    @property
    def uses_semantics(self) -> bool:
        return self.variant != "bypass"

    def forward(self, x, tm=None) -> tuple[T.Tensor, T.Tensor | None]:
        if self.attention is not None:
            return self.attention(x, tm)
        return fuse_variant(x, tm, self.variant, self.norm, self.proj), None


def fuse_variant(x, tm, variant: str, norm: LayerNorm, proj: Linear | None = None) -> T.Tensor:
    x = T.as_tensor(x)
    if variant == "bypass":
        return norm(x)
    tm = T.as_tensor(tm)
    if x.shape != tm.shape:
        raise DimensionError(f"fusion operands differ in shape: {x.shape} vs {tm.shape}")
    if variant == "add":
        return norm(x + tm)
    if variant == "mul":
        return norm(x * tm)
    if variant == "mul_residual":
        return norm(x + x * tm)
    if variant == "concat":
        if proj is None:
            raise ConfigError("concat fusion needs a projection layer")
        return norm(proj(T.concat([x, tm], axis=-1)))
    raise ConfigError(f"variant {variant!r} is not an element-wise fusion")


class Classifier(Module):
    """Mean over the token axis, then an affine map to class logits."""

    def __init__(self, d_model: int, n_classes: int, rng: np.random.Generator, bias: bool = True):
        self.head = Linear(d_model, n_classes, rng, bias=bias)

    def forward(self, fused) -> T.Tensor:
        fused = T.as_tensor(fused)
        return self.head(T.mean(fused, axis=-2))


def classify(fused, classifier: Classifier) -> T.Tensor:
    return classifier(fused)
