"""Shared feature extractor followed by one two-way dense head per atomic action."""
from __future__ import annotations

import numpy as np

from ..autodiff import Rng, Tensor, reshape
from ..core import NOT_SELECTED, SELECTED, ActionSpace
from .base import Policy, pair_cross_entropy, pair_log_probs, targets_matrix
from .nn import MLP, Linear


class MultiDensePolicy(Policy):
    """``extractor``: state -> features; ``heads``: features -> 2 logits per atom.

    The heads are stored as one ``(f, 2m)`` matrix whose column pair
    ``(2i, 2i+1)`` is head ``i``; no weight is shared between heads.
    """

    kind = "multidense"

    def __init__(self, state_dim: int, space: ActionSpace, hidden: int = 128, features: int = 64,
                 rng: Rng | None = None):
        super().__init__(state_dim, space)
        self.hidden_size = hidden
        self.features = features
        rng = rng or Rng(0)
        self.extractor = MLP((state_dim, hidden, features), rng.spawn("extractor"), out_activation=True)
        self.heads = Linear(features, 2 * space.m, rng.spawn("heads"))

    def config(self) -> dict:
        return {"hidden": self.hidden_size, "features": self.features}

    def head_logits(self, states) -> Tensor:
        """``(B, m, 2)`` logits; index 0 = not selected, 1 = selected."""
        h = self.heads(self.extractor(self._inputs(states)))
        return reshape(h, (h.shape[0], self.space.m, 2))

    def log_status(self, states) -> Tensor:
        h = self.heads(self.extractor(self._inputs(states)))
        return pair_log_probs(h, self.space.m)

    def loss(self, states, actions) -> Tensor:
        return pair_cross_entropy(self.log_status(states), targets_matrix(actions, self.space.m))

    def predict(self, states) -> list[frozenset]:
        z = self.head_logits(states).data
        # equal logits count as not selected
        chosen = z[..., SELECTED] > z[..., NOT_SELECTED]
        return [frozenset(int(i) for i in np.flatnonzero(row)) for row in chosen]
