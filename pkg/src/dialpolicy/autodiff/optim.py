"""First-order optimizers over named parameter tensors."""
from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from .tensor import NonFiniteError, Tensor


def _named(params) -> list[tuple[str, Tensor]]:
    if isinstance(params, Mapping):
        return list(params.items())
    out = []
    for i, p in enumerate(params):
        out.append(p if isinstance(p, tuple) else (p.name or f"param{i}", p))
    return out


class Optimizer:
    def __init__(self, params: Mapping[str, Tensor] | Iterable[Tensor], lr: float):
        if not lr > 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = _named(params)
        self.lr = float(lr)
        self.t = 0

    def _grads(self, grads) -> list[np.ndarray]:
        out = []
        for name, p in self.params:
            g = grads.get(name) if grads is not None else p.grad
            g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64)
            if g.shape != p.shape:
                raise ValueError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
            if not np.all(np.isfinite(g)):
                raise NonFiniteError(f"non-finite gradient for parameter {name}")
            out.append(g)
        return out

    def step(self, grads: Mapping[str, np.ndarray] | None = None) -> None:
        """Apply one update using ``grads`` by name, or each parameter's ``.grad``."""
        gs = self._grads(grads)
        self.t += 1
        for (name, p), g in zip(self.params, gs):
            p.assign(self._update(name, p.data, g))

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None

    def _update(self, name: str, w: np.ndarray, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class SGD(Optimizer):
    def _update(self, name, w, g):
        return w - self.lr * g


class Adam(Optimizer):
    def __init__(self, params, lr: float = 1e-3, betas: tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8):
        super().__init__(params, lr)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def _update(self, name, w, g):
        m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
        v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
        m_hat = m / (1.0 - self.beta1 ** self.t)
        v_hat = v / (1.0 - self.beta2 ** self.t)
        return w - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind: str, params, lr: float) -> Optimizer:
    if kind == "adam":
        return Adam(params, lr=lr)
    if kind == "sgd":
        return SGD(params, lr=lr)
    raise ValueError(f"unknown optimizer {kind!r}")
