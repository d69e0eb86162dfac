"""Agenda-based rule user.

The user talks about one goal domain at a time, in goal order.  Opening a
domain it volunteers its first constraints and asks for everything it
wants; informs are said once, while requests and booking requests are
repeated every turn until the system satisfies them.  System requests are
answered with the goal value, or ``dontcare`` for slots the goal leaves
open.  The user never lies and never changes its goal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from ..core import parse_atom
from .goal import UserGoal
from .schema import DONTCARE, PEOPLE, satisfies


class UserAct(NamedTuple):
    domain: str
    intent: str
    slot: str
    value: str = ""

    @property
    def atom(self) -> str:
        return f"{self.domain}-{self.intent}-{self.slot}"


@dataclass
class SystemTurn:
    """A system action resolved against the database.

    ``offers`` holds, per domain with an inform act, the informable values of
    the entity whose details were given; ``bookings`` holds the booked
    entity's values (or ``None``) and the party size taken from the tracker.
    """

    atoms: tuple[str, ...]
    offers: dict[str, dict[str, str] | None] = field(default_factory=dict)
    bookings: dict[str, tuple[dict[str, str] | None, str | None]] = field(default_factory=dict)


@dataclass
class UserAgenda:
    goal: UserGoal
    volunteer: int = 2
    delivered: set[tuple[str, str]] = field(default_factory=set)
    answered: set[tuple[str, str]] = field(default_factory=set)
    booking_ok: dict[str, bool] = field(default_factory=dict)
    offer_ok: dict[str, bool] = field(default_factory=dict)
    opened: set[str] = field(default_factory=set)

    def domain_done(self, d: str) -> bool:
        if any((d, r) not in self.answered for r in self.goal.requests[d]):
            return False
        if self.goal.needs_booking(d):
            return self.booking_ok.get(d, False)
        return self.offer_ok.get(d, False)

    @property
    def done(self) -> bool:
        return all(self.domain_done(d) for d in self.goal.domains)

    def current_domain(self) -> str | None:
        for d in self.goal.domains:
            if not self.domain_done(d):
                return d
        return None

    def pending(self) -> list[tuple[str, str]]:
        """Outstanding requests, domain order."""
        return [(d, r) for d in self.goal.domains for r in self.goal.requests[d]
                if (d, r) not in self.answered]

    def _inform(self, d: str, slot: str) -> UserAct:
        self.delivered.add((d, slot))
        return UserAct(d, "inform", slot, self.goal.constraints[d].get(slot, DONTCARE))

    def _undelivered(self, d: str) -> list[UserAct]:
        return [self._inform(d, s) for s in self.goal.constraints[d] if (d, s) not in self.delivered]


def user_step(agenda: UserAgenda, system: SystemTurn | None) -> tuple[tuple[UserAct, ...], bool]:
    """Advance the user by one turn; ``system=None`` produces the opening turn."""
    goal = agenda.goal
    acts: list[UserAct] = []
    if system is not None:
        for name in sorted(system.atoms):
            d, act, slot = parse_atom(name)
            if d not in goal.domains:
                continue
            if act == "request":
                acts.append(agenda._inform(d, slot))
            elif act == "inform":
                if slot in goal.requests[d]:
                    agenda.answered.add((d, slot))
            elif act == "book" and goal.needs_booking(d):
                values, people = system.bookings.get(d, (None, None))
                agenda.booking_ok[d] = (
                    satisfies(values, goal.constraints[d]) and people == str(goal.book[d])
                )
        for d, values in system.offers.items():
            if d in goal.domains:
                agenda.offer_ok[d] = satisfies(values, goal.constraints[d])

    if agenda.done:
        return (), True

    d = agenda.current_domain()
    unanswered = [r for r in goal.requests[d] if (d, r) not in agenda.answered]
    if d not in agenda.opened:
        agenda.opened.add(d)
        first = [s for s in goal.constraints[d] if (d, s) not in agenda.delivered]
        acts += [agenda._inform(d, s) for s in first[: agenda.volunteer]]
        acts += [UserAct(d, "request", r) for r in unanswered]
    elif goal.needs_booking(d):
        if unanswered:
            acts += [UserAct(d, "request", r) for r in unanswered]
        else:
            if d in agenda.booking_ok:
                # a failed booking: push the constraints the system has not heard
                acts += agenda._undelivered(d)
            acts.append(UserAct(d, "book", PEOPLE, str(goal.book[d])))
    else:
        if unanswered:
            acts += [UserAct(d, "request", r) for r in unanswered]
        else:
            # details came from an entity that breaks the goal
            acts += agenda._undelivered(d)
            acts += [UserAct(d, "request", r) for r in goal.requests[d]]

    seen, out = set(), []
    for a in acts:
        key = (a.domain, a.intent, a.slot)
        if key not in seen:
            seen.add(key)
            out.append(a)
    return tuple(out), False
