"""The dialogue environment, the episode loop and expert corpus generation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from ..autodiff import Rng
from ..core import ActionSet, ActionSpace, Corpus, StateActionPair, parse_atom, sort_actions_by_frequency
from .expert import ExpertPolicy
from .goal import UserGoal, sample_goal
from .schema import PEOPLE, DomainSchema, EntityDB, default_db, default_schema
from .tracker import StateEncoder, TrackerState, dst_update
from .user import SystemTurn, UserAct, UserAgenda, user_step

MAX_TURNS = 40
SUCCESS, TIMEOUT = "success", "failure-timeout"


class Policy(Protocol):
    def act(self, state: np.ndarray, tracker: TrackerState) -> ActionSet: ...


def episode_reward(turn_count: int, success: bool, max_turns: int = MAX_TURNS) -> float:
    """-1 per elapsed turn, plus 2T on success within T turns or -T otherwise."""
    return float(-turn_count + (2 * max_turns if success else -max_turns))


@dataclass
class Turn:
    state: np.ndarray
    system: ActionSet
    offers: dict[str, dict[str, str] | None]
    bookings: dict[str, tuple[dict[str, str] | None, str | None]]
    user: tuple[UserAct, ...]
    atoms: tuple[str, ...] = ()


@dataclass
class EpisodeLog:
    goal: UserGoal
    opening: tuple[UserAct, ...]
    turns: list[Turn] = field(default_factory=list)
    termination: str = TIMEOUT
    turn_count: int = 0
    reward: float = 0.0
    max_turns: int = MAX_TURNS

    @property
    def success(self) -> bool:
        return self.termination == SUCCESS

    def to_json(self, space: ActionSpace) -> dict:
        return {
            "goal": self.goal.to_json(),
            "opening": [list(a) for a in self.opening],
            "turns": [
                {
                    "state": [int(x) for x in t.state],
                    "system": space.to_names(t.system),
                    "offers": t.offers,
                    "bookings": {d: [v, p] for d, (v, p) in t.bookings.items()},
                    "user": [list(a) for a in t.user],
                }
                for t in self.turns
            ],
            "termination": self.termination,
            "turn_count": self.turn_count,
            "reward": self.reward,
            "max_turns": self.max_turns,
        }

    @classmethod
    def from_json(cls, obj: dict, space: ActionSpace) -> "EpisodeLog":
        turns = [
            Turn(
                np.array(t["state"], dtype=np.int8),
                space.from_names(t["system"]),
                t["offers"],
                {d: (v, p) for d, (v, p) in t["bookings"].items()},
                tuple(UserAct(*a) for a in t["user"]),
                tuple(t["system"]),
            )
            for t in obj["turns"]
        ]
        return cls(UserGoal.from_json(obj["goal"]), tuple(UserAct(*a) for a in obj["opening"]),
                   turns, obj["termination"], int(obj["turn_count"]), float(obj["reward"]),
                   int(obj.get("max_turns", MAX_TURNS)))


class DialogueEnv:
    def __init__(self, schema: DomainSchema | None = None, db: EntityDB | None = None,
                 max_turns: int = MAX_TURNS, volunteer: int = 2, max_domains: int = 3):
        self.schema = schema or default_schema()
        self.db = db or default_db(self.schema)
        self.max_turns = max_turns
        self.volunteer = volunteer
        self.max_domains = max_domains
        self.encoder = StateEncoder(self.schema)
        self.space: ActionSpace = self.encoder.system_space

    @property
    def state_dim(self) -> int:
        return self.encoder.dim

    def sample_goal(self, rng: Rng) -> UserGoal:
        return sample_goal(rng, self.schema, self.db, self.max_domains)

    def expert(self) -> ExpertPolicy:
        return ExpertPolicy(self.schema, self.space)

    def resolve(self, actions: ActionSet, tracker: TrackerState) -> SystemTurn:
        """Attach database entities to inform and book acts.

        The entity is the first row matching the tracked belief of its domain.
        """
        atoms = tuple(self.space.to_names(actions))
        offers, bookings = {}, {}
        for name in atoms:
            d, act, _ = parse_atom(name)
            if act not in ("inform", "book"):
                continue
            belief = tracker.belief[d]
            hits = self.db.query(d, {s: v for s, v in belief.items() if s != PEOPLE})
            values = None
            if hits:
                row = self.db.entity(d, hits[0])
                values = {s: row[s] for s in self.schema.domain(d).slots}
                values["name"] = row["name"]
            if act == "inform":
                offers[d] = values
            else:
                bookings[d] = (values, belief.get(PEOPLE))
        return SystemTurn(atoms, offers, bookings)


def run_episode(policy: Policy, env: DialogueEnv, rng: Rng | None = None,
                goal: UserGoal | None = None, max_turns: int | None = None) -> EpisodeLog:
    if goal is None:
        if rng is None:
            raise ValueError("run_episode needs a goal or an rng to sample one")
        goal = env.sample_goal(rng)
    T = env.max_turns if max_turns is None else max_turns
    agenda = UserAgenda(goal, volunteer=env.volunteer)
    tracker = TrackerState.initial(env.schema)
    opening, done = user_step(agenda, None)
    tracker = dst_update(tracker, opening, env.db)
    log = EpisodeLog(goal, opening, max_turns=T)
    for t in range(1, T + 1):
        state = env.encoder.encode(tracker)
        actions = frozenset(int(a) for a in policy.act(state, tracker))
        env.space.check(actions)
        turn = env.resolve(actions, tracker)
        tracker = tracker.with_system(actions)
        user_acts, done = user_step(agenda, turn)
        log.turns.append(Turn(state, actions, turn.offers, turn.bookings, user_acts, turn.atoms))
        tracker = dst_update(tracker, user_acts, env.db)
        if done:
            log.termination = SUCCESS
            break
    log.turn_count = len(log.turns)
    log.reward = episode_reward(log.turn_count, log.success, T)
    return log


def split_sizes(n: int) -> tuple[int, int, int]:
    """80/10/10 by dialogue: val and test get ``n // 10`` each, train the rest."""
    tenth = n // 10
    return n - 2 * tenth, tenth, tenth


def split_of(i: int, n: int) -> str:
    n_train, n_val, _ = split_sizes(n)
    if i < n_train:
        return "train"
    return "val" if i < n_train + n_val else "test"


def expert_dialogues(env: DialogueEnv, n_dialogues: int, rng: Rng) -> list[EpisodeLog]:
    if n_dialogues < 1:
        raise ValueError("need at least one dialogue")
    expert = env.expert()
    return [run_episode(expert, env, rng.spawn(i)) for i in range(n_dialogues)]


def generate_corpus(env: DialogueEnv, n_dialogues: int, rng: Rng,
                    return_logs: bool = False):
    """Expert self-play decomposed into (state, expert action) pairs.

    The returned corpus carries an action space ordered by training-split
    frequency.
    """
    logs = expert_dialogues(env, n_dialogues, rng)
    pairs = []
    for i, log in enumerate(logs):
        split = split_of(i, n_dialogues)
        pairs += [StateActionPair(t.state, t.system, split, i) for t in log.turns]
    corpus = Corpus(env.space, env.state_dim, pairs)
    split = "train" if corpus.split("train") else None
    corpus = corpus.with_space(env.space.with_frequency_order(sort_actions_by_frequency(corpus, split)))
    return (corpus, logs) if return_logs else corpus


def write_episodes(logs: Iterable[EpisodeLog], space: ActionSpace, path: str | Path,
                   scores: Iterable[dict] | None = None) -> None:
    scores = list(scores) if scores is not None else None
    with open(path, "w", encoding="utf-8") as fh:
        for i, log in enumerate(logs):
            rec = log.to_json(space)
            if scores is not None:
                rec["score"] = scores[i]
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_episodes(path: str | Path, space: ActionSpace) -> list[EpisodeLog]:
    with open(path, encoding="utf-8") as fh:
        return [EpisodeLog.from_json(json.loads(line), space) for line in fh if line.strip()]
