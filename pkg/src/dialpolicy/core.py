"""Action spaces, state layouts and state-action corpora shared by every model.

Action sets are ``frozenset`` objects of atom indices.  Atom names are only
used at file boundaries.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

SPLITS = ("train", "val", "test")
SPECIALS = ("PAD", "SOA", "EOA")

# Status pair convention for two-hot encodings: index 0 = not selected,
# index 1 = selected.
NOT_SELECTED, SELECTED = 0, 1

ActionSet = frozenset


class CorpusFormatError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


def render_atom(domain: str, act: str, slot: str) -> str:
    return f"{domain}-{act}-{slot}"


def parse_atom(name: str) -> tuple[str, str, str]:
    parts = name.split("-")
    if len(parts) != 3 or not all(parts):
        raise ValueError(f"atomic action must look like domain-acttype-slot, got {name!r}")
    return parts[0], parts[1], parts[2]


@dataclass(frozen=True)
class ActionSpace:
    """Ordered atomic actions plus the decoder specials PAD, SOA and EOA.

    ``frequency_order`` lists atom indices from most to least frequent and
    fixes the order in which a set is written out as a decoding path.
    """

    atoms: tuple[str, ...]
    frequency_order: tuple[int, ...] = ()

    def __post_init__(self):
        atoms = tuple(self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if len(set(atoms)) != len(atoms):
            raise ValueError("atom ids must be unique")
        if set(atoms) & set(SPECIALS):
            raise ValueError("atoms may not reuse special symbol names")
        order = tuple(self.frequency_order) or tuple(range(len(atoms)))
        if sorted(order) != list(range(len(atoms))):
            raise ValueError("frequency_order must be a permutation of the atoms")
        object.__setattr__(self, "frequency_order", order)
        rank = np.empty(len(atoms), dtype=np.int64)
        rank[list(order)] = np.arange(len(atoms))
        object.__setattr__(self, "_rank", rank)
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(atoms)})

    # -- sizes and specials ---------------------------------------------------
    @property
    def m(self) -> int:
        return len(self.atoms)

    @property
    def pad(self) -> int:
        return self.m

    @property
    def soa(self) -> int:
        return self.m + 1

    @property
    def eoa(self) -> int:
        return self.m + 2

    @property
    def n_symbols(self) -> int:
        return self.m + 3

    def symbol_name(self, i: int) -> str:
        return self.atoms[i] if i < self.m else SPECIALS[i - self.m]

    def rank(self, atom: int) -> int:
        return int(self._rank[atom])

    @property
    def ranks(self) -> np.ndarray:
        return self._rank.copy()

    # -- name <-> index -------------------------------------------------------
    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown atomic action {name!r}") from None

    def from_names(self, names: Iterable[str]) -> ActionSet:
        return frozenset(self.index(n) for n in names)

    def to_names(self, actions: Iterable[int]) -> list[str]:
        self.check(actions)
        return [self.atoms[i] for i in sorted(actions)]

    def check(self, actions: Iterable[int]) -> None:
        for a in actions:
            if not (isinstance(a, (int, np.integer)) and 0 <= a < self.m):
                raise ValueError(f"unknown atomic action index {a!r}")

    # -- encodings --------------------------------------------------------------
    def to_vector(self, actions: Iterable[int]) -> np.ndarray:
        self.check(actions)
        v = np.zeros(self.m, dtype=np.int8)
        v[list(actions)] = 1
        return v

    def from_vector(self, vec) -> ActionSet:
        vec = np.asarray(vec)
        if vec.shape != (self.m,) or not np.isin(vec, (0, 1)).all():
            raise ValueError(f"expected a binary vector of length {self.m}")
        return frozenset(int(i) for i in np.flatnonzero(vec))

    def to_two_hot(self, actions: Iterable[int]) -> np.ndarray:
        """Hard two-hot encoding: pair ``i`` is (1, 0) if unselected, (0, 1) if selected."""
        sel = self.to_vector(actions).astype(np.float64)
        pairs = np.stack([1.0 - sel, sel], axis=1)
        return pairs.reshape(-1)

    def from_two_hot(self, vec) -> ActionSet:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (2 * self.m,):
            raise ValueError(f"expected a two-hot vector of length {2 * self.m}")
        pairs = vec.reshape(self.m, 2)
        if not (np.isin(pairs, (0.0, 1.0)).all() and (pairs.sum(axis=1) == 1.0).all()):
            raise ValueError("soft two-hot vector; harden it (argmax per pair) first")
        return frozenset(int(i) for i in np.flatnonzero(pairs[:, SELECTED]))

    def to_path(self, actions: Iterable[int]) -> list[int]:
        """Atoms sorted by frequency rank, terminated by EOA."""
        actions = list(actions)
        self.check(actions)
        return sorted(set(actions), key=self.rank) + [self.eoa]

    def from_path(self, path: Sequence[int]) -> ActionSet:
        atoms = []
        for s in path:
            if s == self.eoa:
                break
            if s >= self.m:
                raise ValueError(f"special symbol {self.symbol_name(s)} inside an action path")
            atoms.append(int(s))
        return frozenset(atoms)

    def with_frequency_order(self, order: Sequence[int]) -> "ActionSpace":
        return ActionSpace(self.atoms, tuple(order))

    # -- serialization -----------------------------------------------------------
    def to_json(self) -> dict:
        return {"atoms": list(self.atoms),
                "frequency_order": [self.atoms[i] for i in self.frequency_order]}

    @classmethod
    def from_json(cls, obj: dict) -> "ActionSpace":
        atoms = tuple(obj["atoms"])
        index = {a: i for i, a in enumerate(atoms)}
        order = tuple(index[a] for a in obj.get("frequency_order", atoms))
        return cls(atoms, order)


@dataclass(frozen=True)
class StateLayout:
    """Named contiguous segments of the binary dialogue-state vector."""

    segments: tuple[tuple[str, int], ...]

    @property
    def dim(self) -> int:
        return sum(n for _, n in self.segments)

    def span(self, name: str) -> tuple[int, int]:
        start = 0
        for seg, n in self.segments:
            if seg == name:
                return start, start + n
            start += n
        raise KeyError(name)

    def validate(self, state) -> np.ndarray:
        state = np.asarray(state)
        if state.shape != (self.dim,):
            raise ValueError(f"state must have shape ({self.dim},), got {state.shape}")
        if not np.isin(state, (0, 1)).all():
            raise ValueError("state entries must be 0 or 1")
        return state


def sort_actions_by_frequency(corpus: "Corpus", split: str | None = "train") -> tuple[int, ...]:
    """Atom indices by descending count; ties broken by rendered name."""
    pairs = corpus.pairs if split is None else corpus.split(split)
    if not pairs:
        raise ValueError("cannot order actions from an empty corpus")
    counts = Counter()
    for pair in pairs:
        counts.update(pair.actions)
    space = corpus.space
    return tuple(sorted(range(space.m), key=lambda i: (-counts[i], space.atoms[i])))


@dataclass(frozen=True)
class StateActionPair:
    state: np.ndarray
    actions: ActionSet
    split: str = "train"
    dialogue: int = -1


@dataclass
class Corpus:
    space: ActionSpace
    state_dim: int
    pairs: list[StateActionPair] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[StateActionPair]:
        return iter(self.pairs)

    def split(self, name: str) -> list[StateActionPair]:
        return [p for p in self.pairs if p.split == name]

    def subset(self, pairs: Iterable[StateActionPair]) -> "Corpus":
        return Corpus(self.space, self.state_dim, list(pairs))

    def dialogues(self, split: str | None = None) -> list[int]:
        seen = dict.fromkeys(p.dialogue for p in self.pairs if split is None or p.split == split)
        return list(seen)

    def arrays(self, split: str | None = None) -> tuple[np.ndarray, list[ActionSet]]:
        pairs = self.pairs if split is None else self.split(split)
        if not pairs:
            return np.zeros((0, self.state_dim)), []
        states = np.stack([p.state for p in pairs]).astype(np.float64)
        return states, [p.actions for p in pairs]

    def with_space(self, space: ActionSpace) -> "Corpus":
        if space.atoms != self.space.atoms:
            raise ValueError("replacement action space has different atoms")
        return Corpus(space, self.state_dim, self.pairs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return (
            self.space.atoms == other.space.atoms
            and self.state_dim == other.state_dim
            and len(self.pairs) == len(other.pairs)
            and all(
                a.split == b.split and a.actions == b.actions and a.dialogue == b.dialogue
                and np.array_equal(a.state, b.state)
                for a, b in zip(self.pairs, other.pairs)
            )
        )


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """JSON Lines, one ``{"split", "state", "actions", "dialogue"}`` object per pair."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in corpus.pairs:
            rec = {
                "split": p.split,
                "state": [int(x) for x in p.state],
                "actions": corpus.space.to_names(p.actions),
                "dialogue": int(p.dialogue),
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_corpus(path: str | Path, space: ActionSpace, state_dim: int) -> Corpus:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(lineno, f"invalid JSON ({exc.msg})") from None
            pairs.append(_parse_pair(rec, lineno, space, state_dim))
    return Corpus(space, state_dim, pairs)


def _parse_pair(rec, lineno: int, space: ActionSpace, state_dim: int) -> StateActionPair:
    if not isinstance(rec, dict):
        raise CorpusFormatError(lineno, "expected a JSON object")
    missing = {"split", "state", "actions"} - rec.keys()
    if missing:
        raise CorpusFormatError(lineno, f"missing fields {sorted(missing)}")
    if rec["split"] not in SPLITS:
        raise CorpusFormatError(lineno, f"split must be one of {SPLITS}, got {rec['split']!r}")
    state = rec["state"]
    if not isinstance(state, list) or len(state) != state_dim:
        got = len(state) if isinstance(state, list) else type(state).__name__
        raise CorpusFormatError(lineno, f"state dimension {got} does not match {state_dim}")
    if any(x not in (0, 1) or isinstance(x, bool) for x in state):
        raise CorpusFormatError(lineno, "state entries must be 0 or 1")
    if not isinstance(rec["actions"], list):
        raise CorpusFormatError(lineno, "actions must be a list of atom names")
    try:
        actions = space.from_names(rec["actions"])
    except KeyError as exc:
        raise CorpusFormatError(lineno, str(exc.args[0])) from None
    dialogue = rec.get("dialogue", -1)
    if not isinstance(dialogue, int):
        raise CorpusFormatError(lineno, "dialogue must be an integer")
    return StateActionPair(np.array(state, dtype=np.int8), actions, rec["split"], dialogue)


def write_action_space(space: ActionSpace, path: str | Path, schema: dict | None = None) -> None:
    obj = space.to_json()
    if schema is not None:
        obj["schema"] = schema
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def read_action_space(path: str | Path) -> ActionSpace:
    return ActionSpace.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
