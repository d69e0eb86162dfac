import csv
import hashlib
import json
import subprocess
import sys
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from dialpolicy.autodiff import Rng
from dialpolicy.cli import main
from dialpolicy.config import ConfigError, ExperimentConfig
from dialpolicy.core import read_action_space, read_corpus
from dialpolicy.env import DialogueEnv
from dialpolicy.experiments import load_corpus, subsample, train_method
from dialpolicy.metrics import evaluate_policy, parse_report_csv
from dialpolicy.policies import build_policy, load_checkpoint

TINY = {
    "n_dialogues": 60,
    "policy": {"multiclass": {"hidden": [16, 16]}, "multidense": {"hidden": 16, "features": 8},
               "diaseq": {"hidden": 16, "state_features": 8, "embedding": 8},
               "diaadv": {"hidden": 16, "features": 8}},
    "train": {"epochs": 2, "batch_size": 32},
    "adversarial": {"iterations": 4, "eval_every": 2, "batch_size": 16, "critic_hidden": [8, 8]},
    "episodes": 6,
    "val_episodes": 3,
}


def digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def tree(path: Path) -> dict:
    return {str(p.relative_to(path)): digest(p) for p in sorted(path.rglob("*")) if p.is_file()}


def same_outputs(a: Path, b: Path) -> bool:
    """Byte-identical trees, except that saved configs may name different output dirs."""
    ta, tb = tree(a), tree(b)
    if ta.keys() != tb.keys() or not ta:
        return False
    for name in ta:
        if Path(name).name == "config.json":
            ca, cb = (json.loads((root / name).read_text()) for root in (a, b))
            if {**ca, "out": None} != {**cb, "out": None}:
                return False
        elif ta[name] != tb[name]:
            return False
    return True


def run(*args) -> int:
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = ExperimentConfig.from_json({**TINY, "out": str(root / "corpus")})
    cfg.save(root / "tiny.json")
    assert run("gen-corpus", "--config", root / "tiny.json") == 0
    return root


def test_gen_corpus_is_deterministic(workdir, tmp_path):
    assert run("gen-corpus", "--config", workdir / "tiny.json", "--out", tmp_path) == 0
    assert same_outputs(tmp_path, workdir / "corpus")


def test_gen_corpus_splits_and_stats(workdir):
    stats = json.loads((workdir / "corpus" / "stats.json").read_text())
    assert stats["dialogues"] == {"train": 48, "val": 6, "test": 6}
    space = read_action_space(workdir / "corpus" / "action_space.json")
    corpus = read_corpus(workdir / "corpus" / "corpus.jsonl", space, DialogueEnv().state_dim)
    for split in ("train", "val", "test"):
        counts = Counter()
        for line in (workdir / "corpus" / "corpus.jsonl").read_text().splitlines():
            row = json.loads(line)
            if row["split"] == split:
                counts.update(row["actions"])
        assert stats["action_counts"][split] == dict(sorted(counts.items(), key=lambda kv: space.index(kv[0])))
        assert stats["pairs"][split] == len(corpus.split(split))
    written = json.loads((workdir / "corpus" / "config.json").read_text())
    assert written["n_dialogues"] == 60 and written["out"] == str(workdir / "corpus")


def test_split_sizes_for_a_hundred(tmp_path):
    assert run("gen-corpus", "--dialogues", 100, "--out", tmp_path) == 0
    stats = json.loads((tmp_path / "stats.json").read_text())
    assert stats["dialogues"] == {"train": 80, "val": 10, "test": 10}


def test_train_twice_gives_identical_checkpoints(workdir, tmp_path):
    for d in ("a", "b"):
        assert run("train", "--config", workdir / "tiny.json", "--corpus", workdir / "corpus",
                   "--method", "multidense", "--seed", 3, "--out", tmp_path / d) == 0
    assert same_outputs(tmp_path / "a", tmp_path / "b")
    cfg = json.loads((tmp_path / "a" / "seed_3" / "config.json").read_text())
    assert cfg["seeds"] == [3] and cfg["method"] == "multidense"


def test_zero_epochs_checkpoint_is_the_initialization(workdir, tmp_path):
    cfg = ExperimentConfig.load(workdir / "tiny.json").override(
        train={"epochs": 0}, corpus=str(workdir / "corpus"), method="diaseq", seeds=[1], out=str(tmp_path))
    cfg.save(tmp_path / "zero.json")
    assert run("train", "--config", tmp_path / "zero.json") == 0
    saved = load_checkpoint(tmp_path / "seed_1" / "checkpoint.json")
    corpus = load_corpus(cfg, DialogueEnv())
    fresh = build_policy("diaseq", corpus.state_dim, corpus.space, cfg.policy_config("diaseq"),
                         rng=Rng(1).spawn("init"))
    for k, v in fresh.state_dict().items():
        np.testing.assert_array_equal(saved.state_dict()[k], v)


def test_diaseq_memorizes_ten_pairs(workdir):
    cfg = ExperimentConfig.load(workdir / "tiny.json").override(corpus=str(workdir / "corpus"))
    corpus = load_corpus(cfg, DialogueEnv())
    small = corpus.subset(corpus.split("train")[:10])
    cfg = cfg.override(train={"max_steps": 1500, "lr": 1e-2},
                       policy={"diaseq": {"hidden": 32, "state_features": 16, "embedding": 8}})
    _, curve = train_method(cfg, DialogueEnv(), small, "diaseq", 0)
    assert curve[-1]["train_loss"] < 0.01 and curve[-1]["val_accuracy"] == 1.0


def test_diaadv_without_pretrained_fails(workdir, tmp_path, capsys):
    code = run("train", "--config", workdir / "tiny.json", "--corpus", workdir / "corpus",
               "--method", "diaadv", "--out", tmp_path)
    assert code == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "runtime" and "pretrained" in err["message"]


def test_diaadv_from_pretrained_and_unpretrained(workdir, tmp_path):
    base = ("--config", workdir / "tiny.json", "--corpus", workdir / "corpus", "--seed", 0)
    assert run("train", *base, "--method", "multidense", "--out", tmp_path / "md") == 0
    assert run("train", *base, "--method", "diaadv", "--out", tmp_path / "adv",
               "--pretrained", tmp_path / "md" / "seed_{seed}" / "checkpoint.json") == 0
    assert run("train", *base, "--method", "diaadv", "--allow-unpretrained", "--out", tmp_path / "raw") == 0
    header = (tmp_path / "adv" / "seed_0" / "curve.csv").read_text().splitlines()[0]
    assert header.startswith("iteration,")


def test_bad_config_exits_with_config_error(tmp_path, capsys):
    (tmp_path / "bad.json").write_text(json.dumps({"methd": "diaseq"}))
    assert run("train", "--config", tmp_path / "bad.json") == 2
    assert json.loads(capsys.readouterr().err)["error"] == "config"
    with pytest.raises(ConfigError):
        ExperimentConfig(fraction=0.0)


def test_expert_evaluation(tmp_path):
    assert run("evaluate", "--checkpoint", "expert", "--episodes", 100, "--out", tmp_path) == 0
    rows = parse_report_csv((tmp_path / "report.csv").read_text())
    assert rows[-1]["seed"] == "mean" and rows[-1]["Success"] >= 0.98


def test_evaluate_reports_every_seed_and_reruns_identically(workdir, tmp_path):
    cfg = ExperimentConfig.load(workdir / "tiny.json").override(
        corpus=str(workdir / "corpus"), method="multiclass", seeds=[0, 1, 2, 3, 4], out=str(tmp_path / "train"),
        checkpoint=str(tmp_path / "train" / "seed_{seed}" / "checkpoint.json"))
    cfg.save(tmp_path / "five.json")
    assert run("train", "--config", tmp_path / "five.json") == 0
    for d in ("e1", "e2"):
        assert run("evaluate", "--config", tmp_path / "five.json", "--out", tmp_path / d) == 0
    assert same_outputs(tmp_path / "e1", tmp_path / "e2")
    rows = parse_report_csv((tmp_path / "e1" / "report.csv").read_text())
    assert [r["seed"] for r in rows] == ["0", "1", "2", "3", "4", "mean"]
    assert rows[-1]["Success"] == pytest.approx(np.mean([r["Success"] for r in rows[:-1]]), abs=1e-15)


def test_evaluate_rejects_foreign_action_space(workdir, tmp_path, capsys):
    cfg = ExperimentConfig.load(workdir / "tiny.json").override(corpus=str(workdir / "corpus"))
    corpus = load_corpus(cfg, DialogueEnv())
    from dialpolicy.core import ActionSpace
    from dialpolicy.policies import save_checkpoint
    atoms = tuple(reversed(corpus.space.atoms))
    pol = build_policy("multidense", corpus.state_dim, ActionSpace(atoms), {"hidden": 4, "features": 2})
    save_checkpoint(pol, tmp_path / "foreign.json")
    assert run("evaluate", "--checkpoint", tmp_path / "foreign.json", "--out", tmp_path / "e") == 1
    assert "action space" in json.loads(capsys.readouterr().err)["message"]


def test_missing_checkpoint_is_reported(tmp_path):
    assert run("evaluate", "--checkpoint", tmp_path / "nope.json", "--out", tmp_path) == 1


def test_subsamples_are_nested_whole_dialogues(workdir):
    cfg = ExperimentConfig.load(workdir / "tiny.json").override(corpus=str(workdir / "corpus"))
    corpus = load_corpus(cfg, DialogueEnv())
    kept = {}
    for f in (0.1, 0.4, 0.7, 1.0):
        sub = subsample(corpus, f, Rng(5).spawn("subsample"))
        kept[f] = {p.dialogue for p in sub.pairs}
        for d in kept[f]:
            assert sum(p.dialogue == d for p in sub.pairs) == sum(p.dialogue == d for p in corpus.pairs)
    assert kept[0.1] < kept[0.4] < kept[0.7] < kept[1.0]
    assert len({p.dialogue for p in subsample(corpus, 0.1, Rng(5).spawn("subsample")).split("train")}) == 5


def test_fraction_leaving_no_training_data_is_an_error(workdir, tmp_path, capsys):
    code = run("ablate", "--config", workdir / "tiny.json", "--corpus", workdir / "corpus",
               "--fraction", 0.01, "--out", tmp_path)
    assert code == 1
    assert "no training dialogues" in json.loads(capsys.readouterr().err)["message"]


def test_ablation_at_full_data_matches_train_and_evaluate(workdir, tmp_path):
    cfg = ExperimentConfig.load(workdir / "tiny.json").override(
        corpus=str(workdir / "corpus"), fractions=[1.0], methods=["multiclass"], seeds=[2],
        out=str(tmp_path / "ablate"))
    cfg.save(tmp_path / "a.json")
    assert run("ablate", "--config", tmp_path / "a.json") == 0
    assert run("train", "--config", tmp_path / "a.json", "--method", "multiclass", "--out", tmp_path / "t") == 0
    assert digest(tmp_path / "t" / "seed_2" / "checkpoint.json") != ""
    a = load_checkpoint(tmp_path / "ablate" / "fraction_1.0" / "multiclass" / "seed_2" / "checkpoint.json")
    b = load_checkpoint(tmp_path / "t" / "seed_2" / "checkpoint.json")
    for k, v in a.state_dict().items():
        np.testing.assert_array_equal(b.state_dict()[k], v)
    assert run("evaluate", "--config", tmp_path / "a.json", "--out", tmp_path / "e",
               "--checkpoint", tmp_path / "t" / "seed_{seed}" / "checkpoint.json") == 0
    ev = parse_report_csv((tmp_path / "e" / "report.csv").read_text())[-1]
    with open(tmp_path / "ablate" / "ablation.csv") as fh:
        row = next(r for r in csv.DictReader(fh) if r["seed"] == "2")
    assert float(row["Success"]) == ev["Success"] and float(row["Turn"]) == ev["Turn"]


def test_ablation_grid_layout(workdir, tmp_path):
    cfg = ExperimentConfig.load(workdir / "tiny.json").override(
        corpus=str(workdir / "corpus"), fractions=[0.4, 1.0], methods=["multiclass", "diaadv"],
        seeds=[0, 1], out=str(tmp_path))
    cfg.save(tmp_path / "g.json")
    assert run("ablate", "--config", tmp_path / "g.json") == 0
    with open(tmp_path / "ablation.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 2 * 3
    assert {r["seed"] for r in rows} == {"0", "1", "median"}
    text = (tmp_path / "ablation.txt").read_text().splitlines()
    assert len(text) == 3 and text[0].split()[0] == "Fraction"


def test_pretrain_sweep_rows_and_recomputed_gains(workdir, tmp_path):
    cfg = ExperimentConfig.load(workdir / "tiny.json").override(
        corpus=str(workdir / "corpus"), pretrain_epochs=[0, 1, 3], seeds=[0, 1], out=str(tmp_path))
    cfg.save(tmp_path / "s.json")
    assert run("pretrain-sweep", "--config", tmp_path / "s.json") == 0
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["epochs"]) for r in rows] == [0, 1, 3]
    env = DialogueEnv()
    for r in rows:
        d = tmp_path / f"epochs_{r['epochs']}"
        pre = {s: load_checkpoint(d / f"seed_{s}" / "pretrained.json") for s in (0, 1)}
        post = {s: load_checkpoint(d / f"seed_{s}" / "adversarial.json") for s in (0, 1)}
        a = evaluate_policy(pre, env, cfg.episodes, cfg.seeds).mean["success"]
        b = evaluate_policy(post, env, cfg.episodes, cfg.seeds).mean["success"]
        assert float(r["pretrain_success"]) == a and float(r["adversarial_success"]) == b
        assert float(r["gain"]) == b - a


def test_zero_pretraining_is_the_untrained_baseline(workdir, tmp_path):
    cfg = ExperimentConfig.load(workdir / "tiny.json").override(
        corpus=str(workdir / "corpus"), pretrain_epochs=[0], seeds=[4], episodes=40, out=str(tmp_path))
    cfg.save(tmp_path / "z.json")
    assert run("pretrain-sweep", "--config", tmp_path / "z.json") == 0
    saved = load_checkpoint(tmp_path / "epochs_0" / "seed_4" / "pretrained.json")
    corpus = load_corpus(cfg, DialogueEnv())
    fresh = build_policy("multidense", corpus.state_dim, corpus.space, cfg.policy_config("multidense"),
                         rng=Rng(4).spawn("init"))
    for k, v in fresh.state_dict().items():
        np.testing.assert_array_equal(saved.state_dict()[k], v)
    with open(tmp_path / "sweep.csv") as fh:
        row = next(csv.DictReader(fh))
    # untrained heads fire at random; well short of the expert's near-perfect record
    assert float(row["pretrain_success"]) < 0.8


def test_console_script_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dialpolicy.cli", "gen-corpus", "--dialogues", "5",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and "gen-corpus: wrote" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "dialpolicy.cli", "train", "--method", "bogus",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr.strip().splitlines()[-1])["error"] == "config"
