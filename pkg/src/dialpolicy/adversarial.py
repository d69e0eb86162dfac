"""Adversarial fine-tuning of the generator against a learned reward model.

Only the expert corpus is used: real pairs come from it and fake actions are
generated for the same states.  The critic is trained to score real pairs
above generated ones, with a gradient penalty on interpolated inputs.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .autodiff import (
    Graph,
    NonFiniteError,
    Rng,
    Tensor,
    concat,
    make_optimizer,
    mean,
    reshape,
    sqrt,
    transpose,
    tsum,
)
from .core import Corpus
from .policies import AdvGenerator, Module
from .policies.nn import MLP

log = logging.getLogger(__name__)

# keeps the norm differentiable when the input gradient vanishes
GP_EPS = 1e-12


class RewardModel(Module):
    """Three-layer tanh MLP scoring a (state, two-hot action) pair."""

    def __init__(self, state_dim: int, m: int, hidden: Sequence[int] = (64, 64), rng: Rng | None = None):
        super().__init__()
        if len(hidden) != 2:
            raise ValueError("reward model has exactly two hidden layers")
        self.state_dim, self.m = state_dim, m
        self.hidden = tuple(hidden)
        self.mlp = MLP((state_dim + 2 * m, *self.hidden, 1), (rng or Rng(0)).spawn("critic"))

    @property
    def input_dim(self) -> int:
        return self.state_dim + 2 * self.m

    def _join(self, states, actions) -> Tensor:
        states = states if isinstance(states, Tensor) else Tensor(np.asarray(states, dtype=np.float64))
        actions = actions if isinstance(actions, Tensor) else Tensor(np.asarray(actions, dtype=np.float64))
        if states.ndim == 1:
            states = reshape(states, (1, -1))
        if actions.ndim == 1:
            actions = reshape(actions, (1, -1))
        if states.shape[1] != self.state_dim or actions.shape[1] != 2 * self.m:
            raise ValueError(
                f"reward model expects state dim {self.state_dim} and action dim {2 * self.m}, "
                f"got {states.shape[1]} and {actions.shape[1]}")
        return concat([states, actions], axis=-1)

    def score_inputs(self, x: Tensor) -> Tensor:
        out = self.mlp(x)
        return reshape(out, (out.shape[0],))

    def __call__(self, states, actions) -> Tensor:
        """``(B,)`` scores."""
        return self.score_inputs(self._join(states, actions))

    def input_gradient(self, x: Tensor) -> Tensor:
        """d score / d input, built from forward ops so it stays differentiable in the weights."""
        h1, h2, _ = self.mlp.hidden(x)
        l0, l1, l2 = self.mlp.layers
        g2 = (1.0 - h2 * h2) * transpose(l2.weight)
        g1 = (g2 @ transpose(l1.weight)) * (1.0 - h1 * h1)
        return g1 @ transpose(l0.weight)


def gradient_penalty(D: RewardModel, states: np.ndarray, real: np.ndarray, fake: np.ndarray,
                     rng: Rng) -> Tensor:
    """Mean of (||grad_x D(x_hat)|| - 1)^2 over random state-action interpolates."""
    eps = rng.uniform((len(states), 1))
    mixed = eps * real + (1.0 - eps) * fake
    x_hat = Tensor(np.concatenate([states, mixed], axis=1))
    g = D.input_gradient(x_hat)
    norm = sqrt(tsum(g * g, axis=1) + GP_EPS)
    return mean((norm - 1.0) * (norm - 1.0))


def critic_loss(D: RewardModel, states, real, fake, gp_weight: float = 10.0,
                rng: Rng | None = None) -> Tensor:
    """mean D(s, fake) - mean D(s, real) + gp_weight * penalty; minimizing ranks real above fake."""
    states = np.asarray(states, dtype=np.float64)
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake.data if isinstance(fake, Tensor) else fake, dtype=np.float64)
    if real.shape != fake.shape:
        raise ValueError("real and fake batches differ in shape")
    loss = mean(D(states, fake)) - mean(D(states, real))
    if gp_weight > 0:
        if rng is None:
            raise ValueError("gradient penalty needs an rng for the interpolation weights")
        loss = loss + gp_weight * gradient_penalty(D, states, real, fake, rng)
    return loss


def generator_loss(gen: AdvGenerator, D: RewardModel, states, rng: Rng | None = None,
                   noise=None) -> Tensor:
    """-mean D(s, a_fake) with a_fake drawn through the straight-through Gumbel-Softmax."""
    states = np.asarray(states, dtype=np.float64)
    fake = gen.generate(states, rng, noise)
    return -mean(D(states, fake))


@dataclass
class AdvTrainConfig:
    iterations: int = 300
    n_critic: int = 5
    gp_weight: float = 10.0
    batch_size: int = 64
    critic_lr: float = 1e-3
    generator_lr: float = 1e-4
    eval_every: int = 25
    critic_hidden: tuple[int, int] = (64, 64)
    tau: float = 0.005
    pretrained: str | None = None

    def __post_init__(self):
        self.critic_hidden = tuple(self.critic_hidden)
        for name in ("n_critic", "batch_size", "eval_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.iterations < 0 or self.gp_weight < 0:
            raise ValueError("iterations and gp_weight must be non-negative")
        if not (self.critic_lr > 0 and self.generator_lr > 0 and self.tau > 0):
            raise ValueError("learning rates and temperature must be positive")

    def to_json(self) -> dict:
        out = asdict(self)
        out["critic_hidden"] = list(self.critic_hidden)
        return out


class AdversarialDivergence(NonFiniteError):
    def __init__(self, message: str, trace: list[dict]):
        super().__init__(message)
        self.trace = trace


@dataclass
class AdvResult:
    generator: AdvGenerator
    critic: RewardModel
    trace: list[dict] = field(default_factory=list)
    best_iteration: int = 0


Validator = Callable[[AdvGenerator], tuple[float, float]]


def adversarial_train(gen: AdvGenerator, D: RewardModel, corpus: Corpus, cfg: AdvTrainConfig,
                      rng: Rng, validate: Validator | None = None) -> AdvResult:
    """Alternate ``n_critic`` critic updates with one generator update.

    ``validate`` returns (success rate, average turns) for the current
    generator; when given, the parameters with the best validation success
    are restored at the end (ties keep the earliest, so the starting point
    wins unless something beats it).
    """
    X, Y = corpus.arrays("train")
    if not Y:
        raise ValueError("corpus has no training pairs")
    real_all = np.stack([corpus.space.to_two_hot(a) for a in Y])
    n = len(Y)
    batch = min(cfg.batch_size, n)
    c_opt = make_optimizer("adam", D.parameters(), cfg.critic_lr)
    g_opt = make_optimizer("adam", gen.parameters(), cfg.generator_lr)
    sample_rng, noise_rng, gp_rng = rng.spawn("batches"), rng.spawn("gumbel"), rng.spawn("gp")
    trace: list[dict] = []

    best_state, best_iter, best_val = gen.state_dict(), 0, None
    if validate is not None:
        best_val, turns = validate(gen)
        trace.append({"iteration": 0, "critic_loss": float("nan"), "generator_loss": float("nan"),
                      "val_success": best_val, "val_turns": turns})

    for it in range(1, cfg.iterations + 1):
        try:
            c_losses = []
            for _ in range(cfg.n_critic):
                idx = sample_rng.choice(n, size=batch, replace=False)
                fake = gen.generate(X[idx], noise_rng).data
                with Graph() as g:
                    loss = critic_loss(D, X[idx], real_all[idx], fake, cfg.gp_weight, gp_rng)
                g.backward(loss)
                c_opt.step()
                c_losses.append(loss.item())
            idx = sample_rng.choice(n, size=batch, replace=False)
            with Graph() as g:
                gl = generator_loss(gen, D, X[idx], noise_rng)
            g.backward(gl)
            g_opt.step()
        except NonFiniteError as exc:
            raise AdversarialDivergence(f"iteration {it}: {exc}", trace) from exc
        row = {"iteration": it, "critic_loss": float(np.mean(c_losses)),
               "generator_loss": gl.item(), "val_success": float("nan"), "val_turns": float("nan")}
        if validate is not None and (it % cfg.eval_every == 0 or it == cfg.iterations):
            row["val_success"], row["val_turns"] = validate(gen)
            if row["val_success"] > best_val:
                best_val, best_iter, best_state = row["val_success"], it, gen.state_dict()
        trace.append(row)
        log.debug("adv iter %d critic %.4f gen %.4f", it, row["critic_loss"], row["generator_loss"])

    if validate is not None:
        gen.load_state_dict(best_state)
    else:
        best_iter = cfg.iterations
    return AdvResult(gen, D, trace, best_iter)


TRACE_FIELDS = ("iteration", "critic_loss", "generator_loss", "val_success", "val_turns")


def write_trace(trace: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=TRACE_FIELDS)
        w.writeheader()
        for row in trace:
            w.writerow({k: repr(float(row[k])) if k != "iteration" else row[k] for k in TRACE_FIELDS})
