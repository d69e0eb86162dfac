from __future__ import annotations

from typing import Sequence

import numpy as np

from ..autodiff import Graph, Optimizer, Tensor, concat, log_softmax, reshape
from ..core import ActionSet, ActionSpace
from .nn import Module


class LossError(FloatingPointError):
    """Training produced a NaN or infinite loss."""


class Policy(Module):
    kind = "policy"

    def __init__(self, state_dim: int, space: ActionSpace):
        super().__init__()
        self.state_dim = state_dim
        self.space = space

    def config(self) -> dict:
        raise NotImplementedError

    def loss(self, states: np.ndarray, actions: Sequence[ActionSet]) -> Tensor:
        raise NotImplementedError

    def predict(self, states: np.ndarray) -> list[ActionSet]:
        raise NotImplementedError

    def act(self, state, tracker=None) -> ActionSet:
        return self.predict(np.asarray(state, dtype=np.float64)[None, :])[0]

    def _inputs(self, states) -> Tensor:
        states = np.asarray(states, dtype=np.float64)
        if states.ndim == 1:
            states = states[None, :]
        if states.shape[1] != self.state_dim:
            raise ValueError(f"state dimension {states.shape[1]} does not match {self.state_dim}")
        return Tensor(states)


def targets_matrix(actions: Sequence[ActionSet], m: int) -> np.ndarray:
    out = np.zeros((len(actions), m))
    for i, a in enumerate(actions):
        out[i, list(a)] = 1.0
    return out


def pair_log_probs(logits: Tensor, m: int) -> Tensor:
    """Per-atom log-probabilities of (not selected, selected) from ``(B, 2m)`` logits."""
    return log_softmax(reshape(logits, (logits.shape[0], m, 2)), axis=-1)


def binary_pair_logits(z: Tensor) -> Tensor:
    """Sigmoid logit ``z`` written as the pair (0, z), so log_softmax gives log(1-p), log p."""
    B, m = z.shape
    z3 = reshape(z, (B, m, 1))
    return concat([Tensor(np.zeros((B, m, 1))), z3], axis=-1)


def pair_cross_entropy(log_pairs: Tensor, targets: np.ndarray) -> Tensor:
    """Mean over batch and atoms of -log p(target status)."""
    onehot = np.stack([1.0 - targets, targets], axis=-1)
    return -(log_pairs * onehot).sum() / float(targets.size)


def train_step(policy: Policy, opt: Optimizer, states: np.ndarray,
               actions: Sequence[ActionSet]) -> float:
    """One gradient step on a batch; returns the batch loss before the update."""
    if len(actions) == 0:
        raise ValueError("empty batch")
    with Graph() as g:
        loss = policy.loss(states, actions)
    value = loss.item()
    if not np.isfinite(value):
        raise LossError(f"{policy.kind}: non-finite loss {value}")
    g.backward(loss)
    opt.step()
    return value


def exact_set_accuracy(policy: Policy, states: np.ndarray, actions: Sequence[ActionSet]) -> float:
    if len(actions) == 0:
        return 0.0
    preds = policy.predict(states)
    return float(np.mean([p == a for p, a in zip(preds, actions)]))
