"""Gumbel-Softmax action generator on top of the dense-head policy."""
from __future__ import annotations

import numpy as np

from ..autodiff import Rng, Tensor, gumbel_softmax, reshape, straight_through
from ..core import ActionSpace
from .multidense import MultiDensePolicy

DEFAULT_TAU = 0.005


class AdvGenerator(MultiDensePolicy):
    """A :class:`MultiDensePolicy` whose heads can also emit two-hot samples.

    Each head's status distribution goes through a Gumbel-Softmax with
    temperature ``tau`` and is hardened with the straight-through estimator.
    ``predict`` stays the noise-free argmax of the dense heads.
    """

    kind = "diaadv"

    def __init__(self, state_dim: int, space: ActionSpace, hidden: int = 128, features: int = 64,
                 tau: float = DEFAULT_TAU, rng: Rng | None = None):
        super().__init__(state_dim, space, hidden, features, rng)
        if not tau > 0:
            raise ValueError("temperature must be positive")
        self.tau = tau

    def config(self) -> dict:
        return {**super().config(), "tau": self.tau}

    @classmethod
    def from_multidense(cls, policy: MultiDensePolicy, tau: float = DEFAULT_TAU) -> "AdvGenerator":
        gen = cls(policy.state_dim, policy.space, policy.hidden_size, policy.features, tau)
        gen.load_state_dict(policy.state_dict())
        return gen

    def to_multidense(self) -> MultiDensePolicy:
        md = MultiDensePolicy(self.state_dim, self.space, self.hidden_size, self.features)
        md.load_state_dict(self.state_dict())
        return md

    def soft_sample(self, states, rng: Rng | None = None, noise=None) -> Tensor:
        """``(B, m, 2)`` relaxed samples before hardening."""
        return gumbel_softmax(self.log_status(states), self.tau, rng, noise, axis=-1)

    def generate(self, states, rng: Rng | None = None, noise=None) -> Tensor:
        """Hard two-hot ``a_fake`` of shape ``(B, 2m)``; gradients follow the soft sample."""
        y = straight_through(self.soft_sample(states, rng, noise), axis=-1)
        return reshape(y, (y.shape[0], 2 * self.space.m))

    def zero_noise(self, batch: int) -> np.ndarray:
        return np.zeros((batch, self.space.m, 2))
