"""Recognition, semantic-consistency and combined training objectives."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, InputError
from .tensor.nn import Dropout, Linear, Module

log = logging.getLogger(__name__)

NORM_GUARD = 1e-12


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 0.5

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("loss weights must be nonnegative")
        if self.lambda1 == 0 and self.lambda2 == 0:
            raise ConfigError("at least one loss weight must be positive")


class Mlp2(Module):
    """Flatten the L sub-action rows, affine, dropout, affine. No normalization, no activation."""

    def __init__(self, l_max: int, d_model: int, rng: np.random.Generator, dropout: float = 0.1):
        self.l_max = l_max
        self.fc1 = Linear(l_max * d_model, d_model, rng)
        self.drop = Dropout(dropout)
        self.fc2 = Linear(d_model, d_model, rng)

    def forward(self, t_sub) -> T.Tensor:
        t_sub = T.as_tensor(t_sub)
        flat = t_sub.reshape(t_sub.shape[:-2] + (t_sub.shape[-2] * t_sub.shape[-1],))
        return self.fc2(self.drop(self.fc1(flat)))


def cosine_distance(z, h) -> T.Tensor:
    """Mean over rows of ``1 - cos(z, h)``; a zero-norm row counts as orthogonal (distance 1)."""
    z, h = T.as_tensor(z), T.as_tensor(h)
    nz = np.linalg.norm(z.data, axis=-1)
    nh = np.linalg.norm(h.data, axis=-1)
    if np.any(nz < NORM_GUARD) or np.any(nh < NORM_GUARD):
        log.warning("semantic loss received a zero-norm vector; treating it as orthogonal")
    dot = T.tsum(z * h, axis=-1)
    norm_z = T.clamp_min(T.sqrt(T.tsum(z * z, axis=-1) + NORM_GUARD**2), NORM_GUARD)
    norm_h = T.clamp_min(T.sqrt(T.tsum(h * h, axis=-1) + NORM_GUARD**2), NORM_GUARD)
    return T.mean(1.0 - dot / (norm_z * norm_h))


def semantic_loss(t_sub, t_hol, mlp2: Mlp2) -> T.Tensor:
    return cosine_distance(mlp2(t_sub), t_hol)


def recognition_loss(logits, y) -> T.Tensor:
    """Cross-entropy ``-log softmax(logits)[y]``, averaged over the batch."""
    logits = T.as_tensor(logits)
    y = np.atleast_1d(np.asarray(y))
    if logits.ndim == 1:
        logits = logits.reshape(1, -1)
    k = logits.shape[-1]
    if y.shape != (logits.shape[0],) or not np.issubdtype(y.dtype, np.integer) or y.min() < 0 or y.max() >= k:
        raise InputError(f"labels {y.tolist()} invalid for {k} classes")
    picked = T.log_softmax(logits, axis=-1)[np.arange(len(y)), y]
    return -T.mean(picked)


def total_loss(l_recog, l_sem, weights: LossWeights) -> T.Tensor:
    return weights.lambda1 * T.as_tensor(l_recog) + weights.lambda2 * T.as_tensor(l_sem)
