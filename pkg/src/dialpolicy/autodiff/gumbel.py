"""Gumbel noise, the Gumbel-Softmax relaxation and its straight-through form."""
from __future__ import annotations

import numpy as np

from .rng import Rng
from .tensor import Tensor, add, as_tensor, div, softmax, straight_through

# Uniform draws are clamped to [EPS, 1 - EPS] before the double log, which
# bounds every Gumbel sample to roughly [-3.58, 36.04].
EPS = float(np.finfo(np.float64).eps)


def gumbel_from_uniform(u) -> np.ndarray:
    u = np.clip(np.asarray(u, dtype=np.float64), EPS, 1.0 - EPS)
    return -np.log(-np.log(u))


def gumbel_sample(rng: Rng, n) -> Tensor:
    """Draw ``n`` i.i.d. Gumbel(0, 1) values; ``n`` may also be a shape tuple."""
    shape = (n,) if isinstance(n, (int, np.integer)) else tuple(n)
    if not shape or min(shape) < 1:
        raise ValueError(f"need at least one draw, got shape {shape}")
    return Tensor(gumbel_from_uniform(rng.uniform(shape)))


def gumbel_softmax(log_p, tau: float, rng: Rng | None = None, noise=None, axis: int = -1) -> Tensor:
    """Relaxed categorical sample ``softmax((log_p + g) / tau)``.

    ``noise`` replaces the Gumbel draw (test hook); otherwise ``rng`` is
    required.  Gradients flow to ``log_p``.
    """
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    log_p = as_tensor(log_p)
    if noise is None:
        if rng is None:
            raise ValueError("gumbel_softmax needs an rng when no noise is injected")
        noise = gumbel_sample(rng, log_p.shape)
    noise = as_tensor(noise)
    return softmax(div(add(log_p, noise), tau), axis=axis)


def gumbel_softmax_st(log_p, tau: float, rng: Rng | None = None, noise=None, axis: int = -1) -> Tensor:
    return straight_through(gumbel_softmax(log_p, tau, rng, noise, axis), axis=axis)
