"""Goal-conditioned episode scoring and report tables.

Scores depend only on the user goal and the logged turns.  Conventions:

* recall is over the goal's requested (domain, slot) pairs, precision over
  the distinct (domain, slot) pairs the system informed; 0/0 counts as 0 and
  f1 is 0 when both are 0;
* match averages one item per goal domain: the last booking for domains the
  user wants booked (a missing booking scores 0), otherwise the last offered
  entity if there was one.  A goal with no items has match 1;
* success means every request was answered, every domain's final entity
  fits the goal, all within the turn limit.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .autodiff import Rng
from .core import parse_atom
from .env.episode import DialogueEnv, EpisodeLog, Policy, episode_reward, run_episode
from .env.goal import UserGoal
from .env.schema import satisfies

METRICS = ("turns", "match", "precision", "recall", "f1", "success", "reward")
TABLE_COLUMNS = (("Turn", "turns"), ("Match", "match"), ("Rec", "recall"), ("F1", "f1"),
                 ("Success", "success"))
EXTRA_COLUMNS = (("Prec", "precision"), ("Reward", "reward"))


class GoalMismatchError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    """The scorer and the environment disagree about an episode."""


@dataclass(frozen=True)
class EpisodeScore:
    match: float
    precision: float
    recall: float
    f1: float
    success: bool
    turns: int
    reward: float

    def to_json(self) -> dict:
        return asdict(self)


def _ratio(a: int, b: int) -> float:
    return a / b if b else 0.0


def score_episode(log: EpisodeLog, goal: UserGoal) -> EpisodeScore:
    if tuple(log.goal.domains) != tuple(goal.domains):
        raise GoalMismatchError(f"log covers domains {log.goal.domains}, goal has {goal.domains}")
    informed: set[tuple[str, str]] = set()
    last_offer: dict[str, dict | None] = {}
    last_booking: dict[str, tuple] = {}
    for turn in log.turns:
        for name in turn.atoms:
            d, act, slot = parse_atom(name)
            if act == "inform":
                informed.add((d, slot))
        last_offer.update(turn.offers)
        last_booking.update(turn.bookings)

    requested = goal.flat_requests
    hit = len(informed & requested)
    precision, recall = _ratio(hit, len(informed)), _ratio(hit, len(requested))
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    items = []
    for d in goal.domains:
        if goal.needs_booking(d):
            values, people = last_booking.get(d, (None, None))
            items.append(satisfies(values, goal.constraints[d]) and people == str(goal.book[d]))
        elif d in last_offer:
            items.append(satisfies(last_offer[d], goal.constraints[d]))
    match = sum(items) / len(items) if items else 1.0
    # success also needs an entity for every domain, not only a clean record
    present = len(items) == len(goal.domains)
    success = recall == 1.0 and present and match == 1.0 and log.turn_count <= log.max_turns
    return EpisodeScore(float(match), float(precision), float(recall), float(f1), bool(success),
                        int(log.turn_count), float(log.reward))


def check_episode(log: EpisodeLog, score: EpisodeScore) -> None:
    """Cross-check a score against the environment's own view of the episode."""
    if score.success != log.success:
        raise ConsistencyError(
            f"scorer says success={score.success} but the episode ended with {log.termination}")
    expected = episode_reward(log.turn_count, log.success, log.max_turns)
    if log.reward != expected:
        raise ConsistencyError(f"logged reward {log.reward} differs from closed form {expected}")


@dataclass
class AggregateReport:
    name: str
    seeds: tuple[int, ...]
    n_episodes: int
    per_seed: list[dict] = field(default_factory=list)
    mean: dict = field(default_factory=dict)
    ci: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "seeds": list(self.seeds), "n_episodes": self.n_episodes,
                "per_seed": self.per_seed, "mean": self.mean,
                "ci": {k: list(v) for k, v in self.ci.items()}}


def _means(scores: Sequence[EpisodeScore]) -> dict:
    return {k: float(np.mean([float(getattr(s, k)) for s in scores])) for k in METRICS}


def bootstrap_ci(values: np.ndarray, rng: Rng, n_boot: int = 1000,
                 level: float = 0.95) -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    idx = rng.integers(len(values), size=(n_boot, len(values)))
    stats = values[idx].mean(axis=1)
    alpha = (1.0 - level) / 2
    return float(np.quantile(stats, alpha)), float(np.quantile(stats, 1.0 - alpha))


def episode_rng(seed: int, i: int) -> Rng:
    return Rng(seed).spawn("eval").spawn(i)


def evaluate_policy(policy: Policy | Mapping[int, Policy], env: DialogueEnv, n_episodes: int,
                    seeds: Sequence[int], name: str = "policy", n_boot: int = 1000,
                    return_logs: bool = False):
    """Run ``n_episodes`` per seed and aggregate.

    ``policy`` may map each seed to its own policy (one trained model per
    seed).  The reported mean is the mean of per-seed means; the confidence
    interval is a percentile bootstrap over all pooled episodes.
    """
    if n_episodes < 1 or not seeds:
        raise ValueError("need at least one episode and one seed")
    seeds = tuple(int(s) for s in seeds)
    per_seed, pooled, logs = [], [], []
    for seed in seeds:
        scores = []
        pol = policy[seed] if isinstance(policy, Mapping) else policy
        for i in range(n_episodes):
            log = run_episode(pol, env, episode_rng(seed, i))
            score = score_episode(log, log.goal)
            check_episode(log, score)
            scores.append(score)
            if return_logs:
                logs.append((log, score))
        per_seed.append({"seed": seed, **_means(scores)})
        pooled += scores
    mean = {k: float(np.mean([row[k] for row in per_seed])) for k in METRICS}
    boot = Rng(seeds[0]).spawn("bootstrap")
    ci = {k: bootstrap_ci(np.array([float(getattr(s, k)) for s in pooled]), boot.spawn(k), n_boot)
          for k in METRICS}
    report = AggregateReport(name, seeds, n_episodes, per_seed, mean, ci)
    return (report, logs) if return_logs else report


def _columns(extended: bool):
    return TABLE_COLUMNS + (EXTRA_COLUMNS if extended else ())


def report_rows(reports: Sequence[AggregateReport], per_seed: bool = False) -> list[tuple[str, str, dict]]:
    rows = []
    for r in reports:
        if per_seed:
            rows += [(r.name, str(row["seed"]), row) for row in r.per_seed]
        rows.append((r.name, "mean", r.mean))
    return rows


def render_report(reports: Sequence[AggregateReport], out: str | Path | None = None,
                  per_seed: bool = False, extended: bool = False) -> tuple[str, str]:
    """CSV text and an aligned text table, one row per policy (plus per-seed rows).

    With ``out`` the two are written to ``<out>.csv`` and ``<out>.txt``.
    """
    if not reports:
        raise ValueError("nothing to render")
    cols = _columns(extended)
    rows = report_rows(reports, per_seed)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "seed", *(c for c, _ in cols)])
    for name, seed, vals in rows:
        w.writerow([name, seed, *(repr(float(vals[k])) for _, k in cols)])
    csv_text = buf.getvalue()

    def fmt(key, v):
        return f"{v:.2f}" if key in ("turns", "reward") else f"{v:.3f}"

    table = [["Policy", "Seed", *(c for c, _ in cols)]]
    table += [[name, seed, *(fmt(k, vals[k]) for _, k in cols)] for name, seed, vals in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(table[0]))]
    lines = ["  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in table]
    text = "\n".join(lines) + "\n"

    if out is not None:
        out = Path(out)
        out.with_suffix(".csv").write_text(csv_text, encoding="utf-8")
        out.with_suffix(".txt").write_text(text, encoding="utf-8")
    return csv_text, text


def parse_report_csv(text: str) -> list[dict]:
    """Inverse of the CSV half of :func:`render_report`."""
    rows = list(csv.DictReader(io.StringIO(text)))
    for row in rows:
        for k in list(row):
            if k not in ("policy", "seed"):
                row[k] = float(row[k])
    return rows
