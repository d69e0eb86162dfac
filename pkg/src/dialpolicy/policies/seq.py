"""Sequential action decoder: state features seed a GRU that emits atoms one at a time."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Rng, Tensor, concat, log_softmax
from ..core import ActionSet, ActionSpace
from .base import Policy
from .nn import MLP, GRUCell, Linear, param


class PathTooLongError(ValueError):
    pass


@dataclass(frozen=True)
class Hypothesis:
    symbols: tuple[int, ...]
    score: float


class SeqPolicy(Policy):
    """MLP state encoder, GRU decoder over atoms + PAD/SOA/EOA.

    The encoder output ``v_s`` is the decoder's initial hidden state and is
    also concatenated to every step input after the previous symbol's
    embedding.
    """

    kind = "diaseq"

    def __init__(self, state_dim: int, space: ActionSpace, hidden: int = 128, state_features: int = 50,
                 embedding: int = 30, beam: int = 6, max_path_len: int | None = None,
                 monotone: bool = True, rng: Rng | None = None):
        super().__init__(state_dim, space)
        rng = rng or Rng(0)
        self.hidden_size = hidden
        self.state_features = state_features
        self.embedding_size = embedding
        self.beam = beam
        self.max_path_len = space.m if max_path_len is None else max_path_len
        self.monotone = monotone
        n = space.n_symbols
        self.encoder = MLP((state_dim, hidden, state_features), rng.spawn("encoder"), out_activation=True)
        self.embedding = param(rng.spawn("embedding").normal((n, embedding), scale=0.1), "embedding")
        self.gru = GRUCell(embedding + state_features, state_features, rng.spawn("gru"))
        self.out = Linear(state_features, n, rng.spawn("out"))

    def config(self) -> dict:
        return {"hidden": self.hidden_size, "state_features": self.state_features,
                "embedding": self.embedding_size, "beam": self.beam,
                "max_path_len": self.max_path_len, "monotone": self.monotone}

    # -- training ----------------------------------------------------------------
    def paths(self, actions) -> list[list[int]]:
        out = []
        for a in actions:
            path = self.space.to_path(a)
            if len(path) - 1 > self.max_path_len:
                raise PathTooLongError(f"action path of {len(path) - 1} atoms exceeds {self.max_path_len}")
            out.append(path)
        return out

    def _embed(self, symbols: np.ndarray) -> Tensor:
        onehot = np.zeros((len(symbols), self.space.n_symbols))
        onehot[np.arange(len(symbols)), symbols] = 1.0
        return Tensor(onehot) @ self.embedding

    def step_log_probs(self, states, actions) -> tuple[list[Tensor], np.ndarray, np.ndarray]:
        """Teacher-forced log-probabilities per step, with padded targets and mask."""
        paths = self.paths(actions)
        L = max(len(p) for p in paths)
        pad, soa = self.space.pad, self.space.soa
        targets = np.full((len(paths), L), pad, dtype=np.int64)
        for i, p in enumerate(paths):
            targets[i, : len(p)] = p
        mask = (targets != pad).astype(np.float64)
        v = self.encoder(self._inputs(states))
        h = v
        prev = np.full(len(paths), soa, dtype=np.int64)
        out = []
        for t in range(L):
            h = self.gru(concat([self._embed(prev), v], axis=-1), h)
            out.append(log_softmax(self.out(h), axis=-1))
            prev = targets[:, t]
        return out, targets, mask

    def loss(self, states, actions) -> Tensor:
        """Cross-entropy per decoding step, PAD positions excluded, mean over real tokens."""
        steps, targets, mask = self.step_log_probs(states, actions)
        n = self.space.n_symbols
        total = None
        for t, lp in enumerate(steps):
            pick = np.zeros((targets.shape[0], n))
            pick[np.arange(targets.shape[0]), targets[:, t]] = mask[:, t]
            term = (lp * pick).sum()
            total = term if total is None else total + term
        return -total / float(mask.sum())

    def path_log_prob(self, state, path) -> float:
        """Sum of log-probabilities of an explicit symbol path (teacher forced)."""
        v = self.encoder(self._inputs(state))
        h = v
        prev = self.space.soa
        score = 0.0
        for s in path:
            h = self.gru(concat([self._embed(np.array([prev])), v], axis=-1), h)
            score += float(log_softmax(self.out(h), axis=-1).data[0, s])
            prev = s
        return score

    # -- inference -----------------------------------------------------------------
    def _allowed(self, symbols: tuple[int, ...]) -> np.ndarray:
        m = self.space.m
        ok = np.zeros(self.space.n_symbols, dtype=bool)
        ok[self.space.eoa] = True
        if len(symbols) < self.max_path_len:
            if self.monotone:
                ranks = self.space.ranks
                floor = ranks[symbols[-1]] if symbols else -1
                ok[:m] = ranks > floor
            else:
                ok[:m] = True
                ok[list(symbols)] = False
        return ok

    def beam_search(self, state, beam: int | None = None, nested: bool = True) -> Hypothesis:
        """Best closed hypothesis by summed log-probability.

        With ``nested`` the beams of every width 1..B run side by side and the
        best result over all of them is returned, so widening the beam never
        lowers the winning score and width 1 is exactly greedy decoding.  All
        prefixes share one cache, so each distinct prefix is expanded once.
        """
        B = self.beam if beam is None else beam
        if B < 1:
            raise ValueError("beam width must be at least 1")
        widths = range(1, B + 1) if nested else (B,)
        v = self.encoder(self._inputs(state))
        eoa = self.space.eoa
        cache: dict[tuple[int, ...], tuple[Tensor, np.ndarray]] = {}

        def expand(prefixes):
            todo = [p for p in prefixes if p not in cache]
            if not todo:
                return
            h_prev = []
            for p in todo:
                h_prev.append(v.data[0] if not p else cache[p[:-1]][0].data[0])
            prev = np.array([p[-1] if p else self.space.soa for p in todo])
            vv = Tensor(np.repeat(v.data, len(todo), axis=0))
            h = self.gru(concat([self._embed(prev), vv], axis=-1), Tensor(np.stack(h_prev)))
            lp = log_softmax(self.out(h), axis=-1).data
            for i, p in enumerate(todo):
                cache[p] = (Tensor(h.data[i : i + 1]), lp[i])

        groups = {b: {"open": [Hypothesis((), 0.0)], "done": []} for b in widths}
        while True:
            live = [b for b, g in groups.items() if g["open"]]
            if not live:
                break
            expand(sorted({hyp.symbols for b in live for hyp in groups[b]["open"]}))
            for b in live:
                g = groups[b]
                opened = g["open"]
                cand = np.array([h.score for h in opened])[:, None] + np.stack(
                    [cache[h.symbols][1] for h in opened])
                allowed = np.stack([self._allowed(h.symbols) for h in opened])
                flat = np.where(allowed, cand, -np.inf).reshape(-1)
                n_ok = int(allowed.sum())
                # stable sort: equal scores keep (hypothesis, symbol) order
                top = np.argsort(-flat, kind="stable")[: min(b, n_ok)]
                n_sym = allowed.shape[1]
                kept = [Hypothesis(opened[i // n_sym].symbols + (int(i % n_sym),), float(flat[i]))
                        for i in top]
                g["done"] += [c for c in kept if c.symbols[-1] == eoa]
                g["open"] = [c for c in kept if c.symbols[-1] != eoa]
                # extensions only lower a score, so a finished leader is final
                if g["done"] and g["open"]:
                    best_done = max(c.score for c in g["done"])
                    if best_done >= max(c.score for c in g["open"]):
                        g["open"] = []
        finished = [c for g in groups.values() for c in g["done"]]
        return min(finished, key=lambda c: (-c.score, c.symbols))

    def decode(self, state, beam: int | None = None) -> ActionSet:
        return self.space.from_path(self.beam_search(state, beam).symbols)

    def predict(self, states) -> list[ActionSet]:
        states = np.asarray(states, dtype=np.float64)
        if states.ndim == 1:
            states = states[None, :]
        return [self.decode(s) for s in states]
