"""Experiment runner behind the CLI subcommands.

Every random choice for a replicate derives from ``Rng(seed)``: model
initialization, minibatch order, dialogue subsampling, adversarial noise,
validation episodes and evaluation episodes each get their own named child
stream.  The corpus has its own seed so all replicates share one corpus.
"""
from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from pathlib import Path
from typing import Sequence

import numpy as np

from .adversarial import RewardModel, adversarial_train, write_trace
from .autodiff import Rng
from .config import ConfigError, ExperimentConfig
from .core import Corpus, read_action_space, sort_actions_by_frequency, read_corpus, write_action_space, write_corpus
from .env import DialogueEnv, generate_corpus, load_world, save_world, split_sizes, write_episodes
from .env.episode import run_episode
from .metrics import AggregateReport, evaluate_policy, render_report
from .policies import (
    AdvGenerator,
    MultiDensePolicy,
    Policy,
    build_policy,
    load_checkpoint,
    save_checkpoint,
    train_supervised,
)

log = logging.getLogger(__name__)

CORPUS_FILE, SPACE_FILE, WORLD_FILE, STATS_FILE = "corpus.jsonl", "action_space.json", "world.json", "stats.json"
CONFIG_FILE, CHECKPOINT_FILE = "config.json", "checkpoint.json"


class ExperimentError(RuntimeError):
    pass


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _outdir(path: str | Path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExperimentError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def seed_dir(out: Path, seed: int) -> Path:
    return _outdir(out / f"seed_{seed}")


# -- environment and data ----------------------------------------------------------
def load_env(cfg: ExperimentConfig) -> DialogueEnv:
    if cfg.world is None:
        return DialogueEnv(max_turns=cfg.max_turns)
    schema, db = load_world(cfg.world)
    return DialogueEnv(schema, db, max_turns=cfg.max_turns)


def load_corpus(cfg: ExperimentConfig, env: DialogueEnv) -> Corpus:
    if cfg.corpus is None:
        return generate_corpus(env, cfg.n_dialogues, Rng(cfg.corpus_seed).spawn("corpus"))
    root = Path(cfg.corpus)
    if root.is_file():
        root = root.parent
    space = read_action_space(root / SPACE_FILE)
    if space.atoms != env.space.atoms:
        raise ExperimentError("corpus action space does not match the environment's atoms")
    return read_corpus(root / CORPUS_FILE, space, env.state_dim)


def subsample(corpus: Corpus, fraction: float, rng: Rng) -> Corpus:
    """Keep a seeded share of whole dialogues from each split.

    Each split is shuffled once and a prefix kept, so for one seed the
    subsample at a smaller fraction is contained in every larger one.
    """
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"fraction {fraction} outside (0, 1]")
    if fraction == 1.0:
        return corpus
    keep: set[int] = set()
    for split in ("train", "val", "test"):
        ids = corpus.dialogues(split)
        order = rng.spawn(split).permutation(len(ids))
        k = int(np.floor(fraction * len(ids) + 0.5))
        keep.update(ids[i] for i in order[:k])
    sub = corpus.subset(p for p in corpus.pairs if p.dialogue in keep)
    if not sub.split("train"):
        raise ExperimentError(f"fraction {fraction} leaves no training dialogues")
    # the atom order must come from the data the model actually sees
    return sub.with_space(sub.space.with_frequency_order(sort_actions_by_frequency(sub, "train")))


def corpus_stats(corpus: Corpus) -> dict:
    stats = {"pairs": {}, "dialogues": {}, "action_counts": {}}
    for split in ("train", "val", "test"):
        stats["pairs"][split] = len(corpus.split(split))
        stats["dialogues"][split] = len(corpus.dialogues(split))
        counts = Counter(a for p in corpus.split(split) for a in p.actions)
        stats["action_counts"][split] = {corpus.space.atoms[a]: counts[a] for a in sorted(counts)}
    stats["frequency_order"] = [corpus.space.atoms[i] for i in corpus.space.frequency_order]
    return stats


# -- training ------------------------------------------------------------------------
def validation_fn(env: DialogueEnv, n_episodes: int, seed: int):
    root = Rng(seed).spawn("validation")

    def validate(policy) -> tuple[float, float]:
        logs = [run_episode(policy, env, root.spawn(i)) for i in range(n_episodes)]
        return (float(np.mean([l.success for l in logs])), float(np.mean([l.turn_count for l in logs])))

    return validate


def _check_space(policy: Policy, corpus: Corpus, what: str) -> None:
    if policy.space != corpus.space or policy.state_dim != corpus.state_dim:
        raise ExperimentError(f"{what} was trained on a different action space or state layout")


def train_method(cfg: ExperimentConfig, env: DialogueEnv, corpus: Corpus, method: str, seed: int,
                 pretrained: Policy | None = None) -> tuple[Policy, list[dict]]:
    """Train one replicate; returns the selected policy and its curve or trace."""
    root = Rng(seed)
    if method != "diaadv":
        policy = build_policy(method, corpus.state_dim, corpus.space, cfg.policy_config(method),
                              rng=root.spawn("init"))
        return train_supervised(policy, corpus, cfg.train_config(), root.spawn("train"))

    adv = cfg.adv_config()
    if pretrained is None:
        if not cfg.allow_unpretrained:
            raise ExperimentError("diaadv needs a pretrained multidense checkpoint "
                                  "(set 'pretrained' or allow_unpretrained)")
        gen = build_policy("diaadv", corpus.state_dim, corpus.space,
                           {**cfg.policy_config("diaadv"), "tau": adv.tau}, rng=root.spawn("init"))
    else:
        if not isinstance(pretrained, MultiDensePolicy):
            raise ExperimentError(f"diaadv starts from a multidense policy, got {pretrained.kind}")
        _check_space(pretrained, corpus, "the pretrained checkpoint")
        gen = AdvGenerator.from_multidense(pretrained, adv.tau)
    critic = RewardModel(corpus.state_dim, corpus.space.m, adv.critic_hidden, root.spawn("critic"))
    res = adversarial_train(gen, critic, corpus, adv, root.spawn("adversarial"),
                            validation_fn(env, cfg.val_episodes, seed))
    return res.generator, res.trace


def _write_curve(rows: list[dict], method: str, path: Path) -> None:
    if method == "diaadv":
        write_trace(rows, path)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "step", "train_loss", "val_accuracy"])
        for r in rows:
            w.writerow([r["epoch"], r["step"], repr(float(r["train_loss"])), repr(float(r["val_accuracy"]))])


def _pretrained_for(cfg: ExperimentConfig, seed: int) -> Policy | None:
    if cfg.method != "diaadv" or cfg.pretrained is None:
        return None
    path = Path(cfg.pretrained.format(seed=seed))
    if not path.exists():
        raise ExperimentError(f"pretrained checkpoint {path} not found")
    return load_checkpoint(path)


# -- subcommands ---------------------------------------------------------------------
def cmd_gen_corpus(cfg: ExperimentConfig) -> dict:
    out = _outdir(cfg.out)
    env = load_env(cfg)
    corpus = generate_corpus(env, cfg.n_dialogues, Rng(cfg.corpus_seed).spawn("corpus"))
    save_world(env.schema, env.db, out / WORLD_FILE)
    write_corpus(corpus, out / CORPUS_FILE)
    write_action_space(corpus.space, out / SPACE_FILE)
    stats = corpus_stats(corpus)
    stats["split_sizes"] = dict(zip(("train", "val", "test"), split_sizes(cfg.n_dialogues)))
    _dump(stats, out / STATS_FILE)
    cfg.save(out / CONFIG_FILE)
    return stats


def cmd_train(cfg: ExperimentConfig) -> dict[int, Policy]:
    out = _outdir(cfg.out)
    env = load_env(cfg)
    corpus = load_corpus(cfg, env)
    cfg.save(out / CONFIG_FILE)
    trained = {}
    for seed in cfg.seeds:
        d = seed_dir(out, seed)
        data = subsample(corpus, cfg.fraction, Rng(seed).spawn("subsample"))
        policy, curve = train_method(cfg, env, data, cfg.method, seed, _pretrained_for(cfg, seed))
        meta = {"method": cfg.method, "seed": seed, "fraction": cfg.fraction}
        save_checkpoint(policy, d / CHECKPOINT_FILE, meta)
        _write_curve(curve, cfg.method, d / "curve.csv")
        cfg.override(seeds=[seed]).save(d / CONFIG_FILE)
        trained[seed] = policy
        log.info("trained %s seed %d", cfg.method, seed)
    return trained


def _check_env(policy: Policy, env: DialogueEnv, path) -> None:
    if policy.space.atoms != env.space.atoms:
        raise ExperimentError(f"checkpoint {path} uses a different action space than the environment")
    if policy.state_dim != env.state_dim:
        raise ExperimentError(f"checkpoint {path} expects state dim {policy.state_dim}, "
                              f"environment has {env.state_dim}")


def load_eval_policies(cfg: ExperimentConfig, env: DialogueEnv) -> tuple[str, dict]:
    if cfg.checkpoint is None:
        raise ConfigError("evaluate needs a checkpoint path or 'expert'")
    if cfg.checkpoint == "expert":
        return "expert", {s: env.expert() for s in cfg.seeds}
    policies, name = {}, None
    for seed in cfg.seeds:
        path = Path(cfg.checkpoint.format(seed=seed))
        if not path.exists():
            raise ExperimentError(f"checkpoint {path} not found")
        policies[seed] = load_checkpoint(path)
        _check_env(policies[seed], env, path)
        name = policies[seed].kind
    return name, policies


def evaluate_and_write(cfg: ExperimentConfig, env: DialogueEnv, name: str, policies: dict,
                       out: Path) -> AggregateReport:
    report, logs = evaluate_policy(policies, env, cfg.episodes, cfg.seeds, name=name, return_logs=True)
    render_report([report], out / "report", per_seed=True, extended=True)
    _dump(report.to_json(), out / "report.json")
    if cfg.write_episodes:
        write_episodes([l for l, _ in logs], env.space, out / "episodes.jsonl",
                       [s.to_json() for _, s in logs])
    return report


def cmd_evaluate(cfg: ExperimentConfig) -> AggregateReport:
    out = _outdir(cfg.out)
    env = load_env(cfg)
    name, policies = load_eval_policies(cfg, env)
    cfg.save(out / CONFIG_FILE)
    return evaluate_and_write(cfg, env, name, policies, out)


def _median(xs: Sequence[float]) -> float:
    return float(np.median(np.asarray(xs, dtype=np.float64)))


def train_cell(cfg: ExperimentConfig, env: DialogueEnv, corpus: Corpus, fraction: float,
               methods: Sequence[str], seed: int) -> dict[str, Policy]:
    """Train every method for one (fraction, seed); diaadv starts from this cell's multidense."""
    data = subsample(corpus, fraction, Rng(seed).spawn("subsample"))
    cell: dict[str, Policy] = {}
    order = sorted(methods, key=lambda m: m == "diaadv")
    for method in order:
        pre = None
        if method == "diaadv":
            pre = cell.get("multidense")
            if pre is None:
                pre, _ = train_method(cfg, env, data, "multidense", seed)
        cell[method], _ = train_method(cfg, env, data, method, seed, pre)
    return cell


def cmd_ablate(cfg: ExperimentConfig) -> list[dict]:
    """Fraction x method x seed grid, reported as Turn/Success per cell."""
    out = _outdir(cfg.out)
    env = load_env(cfg)
    corpus = load_corpus(cfg, env)
    cfg.save(out / CONFIG_FILE)
    rows = []
    for fraction in cfg.fractions:
        per_method: dict[str, dict[int, Policy]] = {m: {} for m in cfg.methods}
        for seed in cfg.seeds:
            cell = train_cell(cfg, env, corpus, fraction, cfg.methods, seed)
            for m in cfg.methods:
                per_method[m][seed] = cell[m]
                d = _outdir(out / f"fraction_{fraction}" / m / f"seed_{seed}")
                save_checkpoint(cell[m], d / CHECKPOINT_FILE, {"method": m, "seed": seed, "fraction": fraction})
        for m in cfg.methods:
            report = evaluate_policy(per_method[m], env, cfg.episodes, cfg.seeds, name=m)
            for r in report.per_seed:
                rows.append({"fraction": fraction, "method": m, "seed": str(r["seed"]),
                             "turns": r["turns"], "success": r["success"]})
            rows.append({"fraction": fraction, "method": m, "seed": "median",
                         "turns": _median([r["turns"] for r in report.per_seed]),
                         "success": _median([r["success"] for r in report.per_seed])})
    with open(out / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fraction", "method", "seed", "Turn", "Success"])
        for r in rows:
            w.writerow([repr(r["fraction"]), r["method"], r["seed"], repr(r["turns"]), repr(r["success"])])
    (out / "ablation.txt").write_text(ablation_table(rows, cfg.methods), encoding="utf-8")
    return rows


def ablation_table(rows: list[dict], methods: Sequence[str]) -> str:
    """Fractions as rows, each method's median Turn and Success as column pairs."""
    med = {(r["fraction"], r["method"]): r for r in rows if r["seed"] == "median"}
    fractions = sorted({f for f, _ in med})
    head = ["Fraction"] + [f"{m} {c}" for m in methods for c in ("Turn", "Succ")]
    table = [head]
    for f in fractions:
        line = [f"{f:g}"]
        for m in methods:
            r = med[(f, m)]
            line += [f"{r['turns']:.2f}", f"{r['success']:.3f}"]
        table.append(line)
    widths = [max(len(r[i]) for r in table) for i in range(len(head))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in table) + "\n"


SWEEP_FIELDS = ("epochs", "pretrain_success", "adversarial_success", "gain")


def cmd_pretrain_sweep(cfg: ExperimentConfig) -> list[dict]:
    """For each pretraining budget: supervised success, then success after adversarial training."""
    out = _outdir(cfg.out)
    env = load_env(cfg)
    corpus = load_corpus(cfg, env)
    cfg.save(out / CONFIG_FILE)
    per_seed, rows = [], []
    for epochs in cfg.pretrain_epochs:
        budget = cfg.override(train={**cfg.train, "epochs": epochs, "max_steps": None})
        pre, post = {}, {}
        for seed in cfg.seeds:
            d = _outdir(out / f"epochs_{epochs}" / f"seed_{seed}")
            data = subsample(corpus, cfg.fraction, Rng(seed).spawn("subsample"))
            md, _ = train_method(budget, env, data, "multidense", seed)
            save_checkpoint(md, d / "pretrained.json", {"epochs": epochs, "seed": seed})
            pre[seed] = md
            gen, trace = train_method(budget, env, data, "diaadv", seed, md)
            save_checkpoint(gen, d / "adversarial.json", {"epochs": epochs, "seed": seed})
            write_trace(trace, d / "trace.csv")
            post[seed] = gen
        r_pre = evaluate_policy(pre, env, cfg.episodes, cfg.seeds, name="pretrained")
        r_post = evaluate_policy(post, env, cfg.episodes, cfg.seeds, name="diaadv")
        for a, b in zip(r_pre.per_seed, r_post.per_seed):
            per_seed.append({"epochs": epochs, "seed": a["seed"], "pretrain_success": a["success"],
                             "adversarial_success": b["success"], "gain": b["success"] - a["success"]})
        rows.append({"epochs": epochs, "pretrain_success": r_pre.mean["success"],
                     "adversarial_success": r_post.mean["success"],
                     "gain": r_post.mean["success"] - r_pre.mean["success"]})
    _write_rows(rows, SWEEP_FIELDS, out / "sweep.csv")
    _write_rows(per_seed, ("epochs", "seed") + SWEEP_FIELDS[1:], out / "sweep_seeds.csv")
    return rows


def _write_rows(rows: list[dict], cols: Sequence[str], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])


COMMANDS = {
    "gen-corpus": cmd_gen_corpus,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "pretrain-sweep": cmd_pretrain_sweep,
}
