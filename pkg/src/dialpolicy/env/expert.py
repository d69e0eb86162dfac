"""Scripted expert used to produce demonstration corpora."""
from __future__ import annotations

from ..core import ActionSet, ActionSpace, render_atom
from .schema import DomainSchema
from .tracker import TrackerState


def active_domain(tracker: TrackerState, schema: DomainSchema) -> str | None:
    """Domain the user is pursuing: the one it requests or books in, else one it informs."""
    order = {d: i for i, d in enumerate(schema.names)}
    asking = {a.domain for a in tracker.last_user if a.intent in ("request", "book")}
    pool = asking or {a.domain for a in tracker.last_user}
    pool = [d for d in pool if d in order]
    return min(pool, key=order.__getitem__) if pool else None


def expert_policy(tracker: TrackerState, schema: DomainSchema, space: ActionSpace,
                  max_requests: int = 2) -> ActionSet:
    """Ask for missing constraints first; once every slot is known, answer and book."""
    d = active_domain(tracker, schema)
    if d is None:
        return frozenset()
    dom = schema.domain(d)
    missing = [s for s in dom.slots if not tracker.known(d, s)]
    if missing:
        return frozenset(space.index(render_atom(d, "request", s)) for s in missing[:max_requests])
    out = set()
    for a in tracker.last_user:
        if a.domain != d:
            continue
        if a.intent == "request" and a.slot in dom.requestable:
            out.add(space.index(render_atom(d, "inform", a.slot)))
        elif a.intent == "book" and dom.bookable:
            out.add(space.index(render_atom(d, "book", "ref")))
    return frozenset(out)


class ExpertPolicy:
    name = "expert"

    def __init__(self, schema: DomainSchema, space: ActionSpace, max_requests: int = 2):
        self.schema = schema
        self.space = space
        self.max_requests = max_requests

    def act(self, state, tracker: TrackerState) -> ActionSet:
        return expert_policy(tracker, self.schema, self.space, self.max_requests)
