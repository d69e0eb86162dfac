"""Parameter containers and the layers the policies are built from."""
from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from ..autodiff import Rng, Tensor, sigmoid, take_slice, tanh


class Module:
    """Registers ``Tensor`` and ``Module`` attributes in assignment order."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())

    def num_params(self) -> int:
        return sum(p.size for _, p in self.named_parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(params) != set(state):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise KeyError(f"state mismatch: missing {missing}, unexpected {extra}")
        for name, p in params.items():
            p.assign(state[name])
            p.grad = None


def param(data, name: str) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def xavier(rng: Rng, n_in: int, n_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform((n_in, n_out), -bound, bound)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: Rng):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.weight = param(xavier(rng, n_in, n_out), "weight")
        self.bias = param(np.zeros(n_out), "bias")

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class MLP(Module):
    """Stack of ``Linear`` layers with tanh between them.

    ``out_activation`` applies tanh to the last layer as well.
    """

    def __init__(self, sizes: Sequence[int], rng: Rng, out_activation: bool = False):
        super().__init__()
        self.sizes = tuple(sizes)
        self.out_activation = out_activation
        self.layers = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            layer = Linear(a, b, rng.spawn(f"layer{i}"))
            setattr(self, f"l{i}", layer)
            self.layers.append(layer)

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1 or self.out_activation:
                x = tanh(x)
        return x

    def hidden(self, x: Tensor) -> list[Tensor]:
        """Post-activation outputs of every hidden layer, then the final output."""
        outs = []
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1 or self.out_activation:
                x = tanh(x)
            outs.append(x)
        return outs


class GRUCell(Module):
    """Gated recurrent unit with separate input and hidden biases.

    Gate blocks are laid out reset | update | candidate along the columns.
    """

    def __init__(self, n_in: int, n_hidden: int, rng: Rng):
        super().__init__()
        self.n_in, self.n_hidden = n_in, n_hidden
        bound = 1.0 / np.sqrt(n_hidden)
        self.w_ih = param(rng.spawn("w_ih").uniform((n_in, 3 * n_hidden), -bound, bound), "w_ih")
        self.w_hh = param(rng.spawn("w_hh").uniform((n_hidden, 3 * n_hidden), -bound, bound), "w_hh")
        self.b_ih = param(np.zeros(3 * n_hidden), "b_ih")
        self.b_hh = param(np.zeros(3 * n_hidden), "b_hh")

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        H = self.n_hidden
        gi = x @ self.w_ih + self.b_ih
        gh = h @ self.w_hh + self.b_hh
        r = sigmoid(take_slice(gi, 0, H) + take_slice(gh, 0, H))
        z = sigmoid(take_slice(gi, H, 2 * H) + take_slice(gh, H, 2 * H))
        n = tanh(take_slice(gi, 2 * H, 3 * H) + r * take_slice(gh, 2 * H, 3 * H))
        return (1.0 - z) * n + z * h
