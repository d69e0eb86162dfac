"""User goals: per-domain constraints, requested slots and booking party sizes."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..autodiff import Rng
from .schema import DomainSchema, EntityDB


@dataclass
class UserGoal:
    domains: tuple[str, ...]
    constraints: dict[str, dict[str, str]]
    requests: dict[str, tuple[str, ...]]
    book: dict[str, int] = field(default_factory=dict)

    def needs_booking(self, domain: str) -> bool:
        return domain in self.book

    @property
    def flat_constraints(self) -> dict[tuple[str, str], str]:
        return {(d, s): v for d in self.domains for s, v in self.constraints[d].items()}

    @property
    def flat_requests(self) -> set[tuple[str, str]]:
        return {(d, s) for d in self.domains for s in self.requests[d]}

    def validate(self, schema: DomainSchema) -> None:
        for d in self.domains:
            dom = schema.domain(d)
            for s, v in self.constraints.get(d, {}).items():
                if v not in dom.values(s):
                    raise ValueError(f"goal value {d}-{s}={v!r} not in schema")
            for r in self.requests.get(d, ()):
                if r not in dom.requestable:
                    raise ValueError(f"goal requests unknown slot {d}-{r}")
            if d in self.book and not dom.bookable:
                raise ValueError(f"goal books non-bookable domain {d}")
        if not any(self.requests.get(d) for d in self.domains):
            raise ValueError("goal must request at least one slot")

    def to_json(self) -> dict:
        return {
            "domains": list(self.domains),
            "constraints": {d: [[s, v] for s, v in self.constraints[d].items()] for d in self.domains},
            "requests": {d: list(self.requests[d]) for d in self.domains},
            "book": {d: n for d, n in self.book.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "UserGoal":
        domains = tuple(obj["domains"])
        return cls(
            domains,
            {d: {s: v for s, v in obj["constraints"][d]} for d in domains},
            {d: tuple(obj["requests"][d]) for d in domains},
            {d: int(n) for d, n in obj.get("book", {}).items()},
        )


def sample_goal(rng: Rng, schema: DomainSchema, db: EntityDB, max_domains: int = 3,
                book_prob: float = 0.7) -> UserGoal:
    """Draw a goal whose constraints are copied from a real entity.

    One to ``max_domains`` domains in random order; per domain one to all
    informable slots (constraint order is random and decides which ones the
    user volunteers first) and one to all requestable slots.
    """
    usable = [d for d in schema.domains if db.rows[d.name]]
    if not usable:
        raise ValueError("schema has no domain with entities; goals are unsatisfiable")
    n_dom = int(rng.integers(1, min(max_domains, len(usable)) + 1))
    picked = [usable[i] for i in rng.permutation(len(usable))[:n_dom]]
    constraints, requests, book = {}, {}, {}
    for d in picked:
        row = db.rows[d.name][int(rng.integers(len(db.rows[d.name])))]
        k = int(rng.integers(1, len(d.slots) + 1))
        slots = [d.slots[i] for i in rng.permutation(len(d.slots))[:k]]
        constraints[d.name] = {s: row[s] for s in slots}
        r = int(rng.integers(1, len(d.requestable) + 1))
        chosen = set(int(i) for i in rng.permutation(len(d.requestable))[:r])
        requests[d.name] = tuple(s for i, s in enumerate(d.requestable) if i in chosen)
        if d.bookable and rng.random() < book_prob:
            book[d.name] = int(rng.integers(1, schema.max_people + 1))
    goal = UserGoal(tuple(d.name for d in picked), constraints, requests, book)
    for d in goal.domains:
        if not db.query(d, goal.constraints[d]):
            raise ValueError(f"sampled unsatisfiable constraints for {d}")
    return goal
