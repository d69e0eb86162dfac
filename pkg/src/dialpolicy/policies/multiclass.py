"""Multi-label classifier baseline: one sigmoid per atomic action."""
from __future__ import annotations

import numpy as np

from ..autodiff import Rng, Tensor, log_softmax, sigmoid
from ..core import ActionSpace
from .base import Policy, binary_pair_logits, pair_cross_entropy, targets_matrix
from .nn import MLP


class MultiClassPolicy(Policy):
    kind = "multiclass"

    def __init__(self, state_dim: int, space: ActionSpace, hidden=(128, 128),
                 threshold: float = 0.5, rng: Rng | None = None):
        super().__init__(state_dim, space)
        self.hidden = tuple(hidden)
        self.threshold = threshold
        rng = rng or Rng(0)
        self.mlp = MLP((state_dim, *self.hidden, space.m), rng.spawn("mlp"))

    def config(self) -> dict:
        return {"hidden": list(self.hidden), "threshold": self.threshold}

    def logits(self, states) -> Tensor:
        return self.mlp(self._inputs(states))

    def probs(self, states) -> np.ndarray:
        return sigmoid(self.logits(states)).data

    def loss(self, states, actions) -> Tensor:
        """Mean binary cross-entropy over all atoms."""
        z = self.logits(states)
        return pair_cross_entropy(log_softmax(binary_pair_logits(z)), targets_matrix(actions, self.space.m))

    def predict(self, states) -> list[frozenset]:
        p = self.probs(states)
        return [frozenset(int(i) for i in np.flatnonzero(row > self.threshold)) for row in p]
