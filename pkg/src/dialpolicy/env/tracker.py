"""Rule-based dialogue state tracking and the binary state encoding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import ActionSet, ActionSpace, StateLayout
from .schema import DONTCARE, PEOPLE, DomainSchema, EntityDB, system_space, user_space
from .user import UserAct

# result-count buckets per domain
NO_RESULTS_YET, ZERO, ONE, FEW, MANY = range(5)
N_BUCKETS = 5


def count_bucket(n: int) -> int:
    if n == 0:
        return ZERO
    if n == 1:
        return ONE
    return FEW if n <= 4 else MANY


@dataclass(frozen=True)
class TrackerState:
    belief: dict[str, dict[str, str]]
    last_user: tuple[UserAct, ...] = ()
    last_system: ActionSet = frozenset()
    results: dict[str, int] = field(default_factory=dict)

    @classmethod
    def initial(cls, schema: DomainSchema) -> "TrackerState":
        return cls({d: {} for d in schema.names}, (), frozenset(),
                   {d: NO_RESULTS_YET for d in schema.names})

    def with_system(self, actions: ActionSet) -> "TrackerState":
        return TrackerState(self.belief, self.last_user, frozenset(actions), self.results)

    def known(self, domain: str, slot: str) -> bool:
        return slot in self.belief[domain]


def dst_update(tracker: TrackerState, user_acts, db: EntityDB) -> TrackerState:
    """Overwrite beliefs with the latest user informs and recount DB matches."""
    belief = {d: dict(b) for d, b in tracker.belief.items()}
    for act in user_acts:
        if act.domain not in belief:
            continue
        if act.intent == "inform":
            belief[act.domain][act.slot] = act.value
        elif act.intent == "book":
            belief[act.domain][PEOPLE] = act.value
    results = {}
    for d, b in belief.items():
        informed = {s: v for s, v in b.items() if s != PEOPLE}
        results[d] = count_bucket(len(db.query(d, informed))) if informed else NO_RESULTS_YET
    return TrackerState(belief, tuple(user_acts), tracker.last_system, results)


class StateEncoder:
    """Four segments: result buckets, last user action, last system action, belief one-hots.

    Belief one-hots cover every informable value plus ``dontcare`` (an
    unknown slot is all zeros) and, for bookable domains, the party size.
    """

    def __init__(self, schema: DomainSchema):
        self.schema = schema
        self.user_space: ActionSpace = user_space(schema)
        self.system_space: ActionSpace = system_space(schema)
        self._belief_index: dict[tuple[str, str, str], int] = {}
        i = 0
        for d in schema.domains:
            for s, vals in d.informable:
                for v in vals + (DONTCARE,):
                    self._belief_index[(d.name, s, v)] = i
                    i += 1
            if d.bookable:
                for v in schema.people_values:
                    self._belief_index[(d.name, PEOPLE, v)] = i
                    i += 1
        self.layout = StateLayout((
            ("results", N_BUCKETS * len(schema.domains)),
            ("user_action", self.user_space.m),
            ("system_action", self.system_space.m),
            ("belief", i),
        ))

    @property
    def dim(self) -> int:
        return self.layout.dim

    def user_atoms(self, acts) -> ActionSet:
        return frozenset(self.user_space.index(a.atom) for a in acts)

    def encode(self, tracker: TrackerState) -> np.ndarray:
        out = np.zeros(self.layout.dim, dtype=np.int8)
        start, _ = self.layout.span("results")
        for j, d in enumerate(self.schema.names):
            out[start + N_BUCKETS * j + tracker.results.get(d, NO_RESULTS_YET)] = 1
        start, _ = self.layout.span("user_action")
        for k in self.user_atoms(tracker.last_user):
            out[start + k] = 1
        start, _ = self.layout.span("system_action")
        for k in tracker.last_system:
            out[start + k] = 1
        start, _ = self.layout.span("belief")
        for d, b in tracker.belief.items():
            for s, v in b.items():
                out[start + self._belief_index[(d, s, v)]] = 1
        return out

    def belief_from_state(self, state) -> dict[str, dict[str, str]]:
        """Inverse of the belief segment (used by replay checks)."""
        start, stop = self.layout.span("belief")
        seg = np.asarray(state)[start:stop]
        belief = {d: {} for d in self.schema.names}
        for (d, s, v), k in self._belief_index.items():
            if seg[k]:
                belief[d][s] = v
        return belief


def encode_state(tracker: TrackerState, encoder: StateEncoder) -> np.ndarray:
    return encoder.encode(tracker)
