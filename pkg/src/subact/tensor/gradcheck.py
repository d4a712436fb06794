from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigError, ContractError
from .core import Tensor, no_grad


def grad_check(fn: Callable[[], Tensor], inputs: Sequence[Tensor], eps: float = 1e-6) -> float:
    """Max relative error between tape gradients and central differences.

    ``fn`` recomputes a scalar from the current values of ``inputs``; it must be
    deterministic (dropout off). Error per coordinate is
    ``|analytic - numeric| / max(1, |numeric|)``.
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ConfigError(f"eps must lie in [1e-6, 1e-4], got {eps}")
    for t in inputs:
        t.grad = None
    out = fn()
    if out.size != 1:
        raise ContractError(f"grad_check needs a scalar-valued graph, got shape {out.shape}")
    out.backward()
    worst = 0.0
    for t in inputs:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            with no_grad():
                flat[i] = orig + eps
                up = fn().item()
                flat[i] = orig - eps
                down = fn().item()
            flat[i] = orig
            numeric = (up - down) / (2 * eps)
            err = abs(analytic.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst
