"""Domain schema, entity database and the action inventories derived from them."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..autodiff import Rng
from ..core import ActionSpace, render_atom

DONTCARE = "dontcare"
PEOPLE = "people"


@dataclass(frozen=True)
class Domain:
    name: str
    informable: tuple[tuple[str, tuple[str, ...]], ...]
    requestable: tuple[str, ...]
    bookable: bool = False

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.informable)

    def values(self, slot: str) -> tuple[str, ...]:
        for s, vals in self.informable:
            if s == slot:
                return vals
        raise KeyError(f"{self.name} has no informable slot {slot!r}")


@dataclass(frozen=True)
class DomainSchema:
    domains: tuple[Domain, ...]
    max_people: int = 8

    def __post_init__(self):
        if not self.domains:
            raise ValueError("schema needs at least one domain")
        names = [d.name for d in self.domains]
        if len(set(names)) != len(names):
            raise ValueError("duplicate domain names")
        for d in self.domains:
            if "-" in d.name or any("-" in s for s in d.slots + d.requestable):
                raise ValueError("domain and slot names may not contain '-'")

    def domain(self, name: str) -> Domain:
        for d in self.domains:
            if d.name == name:
                return d
        raise KeyError(f"unknown domain {name!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.domains)

    @property
    def people_values(self) -> tuple[str, ...]:
        return tuple(str(i) for i in range(1, self.max_people + 1))

    def to_json(self) -> dict:
        return {
            "max_people": self.max_people,
            "domains": [
                {
                    "name": d.name,
                    "informable": {s: list(v) for s, v in d.informable},
                    "requestable": list(d.requestable),
                    "bookable": d.bookable,
                }
                for d in self.domains
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DomainSchema":
        domains = tuple(
            Domain(
                d["name"],
                tuple((s, tuple(v)) for s, v in d["informable"].items()),
                tuple(d["requestable"]),
                bool(d.get("bookable", False)),
            )
            for d in obj["domains"]
        )
        return cls(domains, int(obj.get("max_people", 8)))


class EntityDB:
    """Rows of slot values per domain; queried by exact match on known slots."""

    def __init__(self, schema: DomainSchema, rows: dict[str, list[dict[str, str]]]):
        self.schema = schema
        self.rows = {name: [dict(r) for r in rows.get(name, [])] for name in schema.names}
        for d in schema.domains:
            needed = set(d.slots) | set(d.requestable)
            for i, row in enumerate(self.rows[d.name]):
                if not needed <= row.keys():
                    raise ValueError(f"{d.name} entity {i} lacks slots {sorted(needed - row.keys())}")
                for s in d.slots:
                    if row[s] not in d.values(s):
                        raise ValueError(f"{d.name} entity {i} has invalid {s}={row[s]!r}")

    def query(self, domain: str, constraints: dict[str, str]) -> list[int]:
        """Indices of entities matching every constraint; ``dontcare`` matches anything."""
        active = {s: v for s, v in constraints.items() if v != DONTCARE and s != PEOPLE}
        return [i for i, row in enumerate(self.rows[domain])
                if all(row.get(s) == v for s, v in active.items())]

    def entity(self, domain: str, index: int) -> dict[str, str]:
        return dict(self.rows[domain][index])

    def to_json(self) -> dict:
        return {name: [dict(r) for r in rows] for name, rows in self.rows.items()}


def satisfies(values: dict[str, str] | None, constraints: dict[str, str]) -> bool:
    if values is None:
        return False
    return all(values.get(s) == v for s, v in constraints.items())


def system_space(schema: DomainSchema) -> ActionSpace:
    """System atoms: request each informable slot, inform each requestable slot, book."""
    atoms = []
    for d in schema.domains:
        atoms += [render_atom(d.name, "request", s) for s in d.slots]
        atoms += [render_atom(d.name, "inform", s) for s in d.requestable]
        if d.bookable:
            atoms.append(render_atom(d.name, "book", "ref"))
    return ActionSpace(tuple(atoms))


def user_space(schema: DomainSchema) -> ActionSpace:
    """User atoms: inform each informable slot, request each requestable slot, book with a party size."""
    atoms = []
    for d in schema.domains:
        atoms += [render_atom(d.name, "inform", s) for s in d.slots]
        atoms += [render_atom(d.name, "request", s) for s in d.requestable]
        if d.bookable:
            atoms.append(render_atom(d.name, "book", PEOPLE))
    return ActionSpace(tuple(atoms))


_DEFAULT_DOMAINS = (
    Domain(
        "restaurant",
        (
            ("food", ("british", "chinese", "french", "indian", "italian", "thai")),
            ("area", ("centre", "east", "north", "south", "west")),
            ("pricerange", ("cheap", "moderate", "expensive")),
            ("seating", ("indoor", "outdoor")),
        ),
        ("phone", "address", "postcode"),
        bookable=True,
    ),
    Domain(
        "hotel",
        (
            ("area", ("centre", "east", "north", "south", "west")),
            ("pricerange", ("cheap", "moderate", "expensive")),
            ("stars", ("2", "3", "4", "5")),
            ("parking", ("yes", "no")),
        ),
        ("phone", "address", "postcode"),
        bookable=True,
    ),
    Domain(
        "attraction",
        (
            ("type", ("cinema", "college", "museum", "park", "theatre")),
            ("area", ("centre", "east", "north", "south", "west")),
            ("entrance", ("free", "paid")),
            ("open", ("day", "evening")),
        ),
        ("phone", "address", "postcode"),
        bookable=False,
    ),
)

_STREETS = ("Mill Road", "Regent Street", "Hills Road", "King Street", "Trumpington Road",
            "Chesterton Road", "Station Road", "Bridge Street")


def default_schema() -> DomainSchema:
    return DomainSchema(_DEFAULT_DOMAINS, max_people=8)


def generate_entities(schema: DomainSchema, n_per_domain: int, rng: Rng) -> EntityDB:
    rows: dict[str, list[dict[str, str]]] = {}
    for d in schema.domains:
        drng = rng.spawn(d.name)
        table = []
        for i in range(n_per_domain):
            row = {s: vals[int(drng.integers(len(vals)))] for s, vals in d.informable}
            for r in d.requestable:
                if r == "phone":
                    row[r] = f"01223{int(drng.integers(100000, 1000000))}"
                elif r == "address":
                    row[r] = f"{int(drng.integers(1, 200))} {_STREETS[int(drng.integers(len(_STREETS)))]}"
                elif r == "postcode":
                    row[r] = f"cb{int(drng.integers(1, 5))}{int(drng.integers(1, 10))}{chr(97 + int(drng.integers(26)))}{chr(97 + int(drng.integers(26)))}"
                else:
                    row[r] = f"{r}-{d.name}-{i}"
            row["name"] = f"{d.name}-{i:03d}"
            table.append(row)
        rows[d.name] = table
    return EntityDB(schema, rows)


def default_db(schema: DomainSchema | None = None, n_per_domain: int = 50, seed: int = 0) -> EntityDB:
    schema = schema or default_schema()
    return generate_entities(schema, n_per_domain, Rng(seed).spawn("entities"))


def save_world(schema: DomainSchema, db: EntityDB, path: str | Path) -> None:
    obj = {"schema": schema.to_json(), "entities": db.to_json()}
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def load_world(path: str | Path) -> tuple[DomainSchema, EntityDB]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    schema = DomainSchema.from_json(obj["schema"])
    return schema, EntityDB(schema, obj["entities"])
