"""Supervised training with minibatches and early stopping on exact-set accuracy."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..autodiff import Rng, make_optimizer
from ..core import Corpus
from .base import Policy, exact_set_accuracy, train_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    optimizer: str = "adam"
    patience: int = 5
    # full-batch step budget instead of epochs when set
    max_steps: int | None = None

    def to_json(self) -> dict:
        return asdict(self)


def train_supervised(policy: Policy, corpus: Corpus, cfg: TrainConfig, rng: Rng,
                     val_split: str = "val") -> tuple[Policy, list[dict]]:
    """Train in place, then restore the parameters with the best validation accuracy.

    Falls back to training accuracy when the corpus has no validation split.
    The returned curve has one row per epoch (row 0 is the initialization).
    """
    X, Y = corpus.arrays("train")
    if not Y:
        raise ValueError("corpus has no training pairs")
    Xv, Yv = corpus.arrays(val_split)
    if not Yv:
        Xv, Yv = X, Y
    opt = make_optimizer(cfg.optimizer, policy.parameters(), cfg.lr)
    best_acc = exact_set_accuracy(policy, Xv, Yv)
    best_state, best_epoch = policy.state_dict(), 0
    curve = [{"epoch": 0, "step": 0, "train_loss": float("nan"), "val_accuracy": best_acc}]
    n = len(Y)
    if cfg.max_steps is not None:
        epochs, batch = cfg.max_steps, n
    else:
        epochs, batch = cfg.epochs, min(cfg.batch_size, n)
    step = 0
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n) if batch < n else np.arange(n)
        losses = []
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            losses.append(train_step(policy, opt, X[idx], [Y[i] for i in idx]))
            step += 1
        acc = exact_set_accuracy(policy, Xv, Yv)
        curve.append({"epoch": epoch, "step": step, "train_loss": float(np.mean(losses)),
                      "val_accuracy": acc})
        log.debug("%s epoch %d loss %.5f val acc %.4f", policy.kind, epoch, np.mean(losses), acc)
        if acc > best_acc:
            best_acc, best_state, best_epoch = acc, policy.state_dict(), epoch
        elif cfg.max_steps is None and epoch - best_epoch >= cfg.patience:
            break
    policy.load_state_dict(best_state)
    return policy, curve
