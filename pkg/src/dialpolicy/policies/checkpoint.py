"""JSON checkpoints with the architecture config embedded.

Layout::

    {"format": "dialpolicy-checkpoint", "version": 1, "kind": "multidense",
     "state_dim": 133, "atoms": [...], "frequency_order": [...],
     "config": {...}, "params": {"name": {"shape": [...], "data": [...]}},
     "meta": {...}}

Floats are written with Python's shortest round-trip repr, so loading
restores every parameter bit for bit.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..core import ActionSpace
from .base import Policy
from .generator import AdvGenerator
from .multiclass import MultiClassPolicy
from .multidense import MultiDensePolicy
from .seq import SeqPolicy

FORMAT = "dialpolicy-checkpoint"
VERSION = 1

POLICY_CLASSES = {
    "multiclass": MultiClassPolicy,
    "multidense": MultiDensePolicy,
    "diaseq": SeqPolicy,
    "diaadv": AdvGenerator,
}


class CheckpointError(ValueError):
    pass


def build_policy(kind: str, state_dim: int, space: ActionSpace, config: dict | None = None,
                 rng=None) -> Policy:
    try:
        cls = POLICY_CLASSES[kind]
    except KeyError:
        raise ValueError(f"unknown policy kind {kind!r}; expected one of {sorted(POLICY_CLASSES)}") from None
    config = dict(config or {})
    if kind == "multiclass" and "hidden" in config:
        config["hidden"] = tuple(config["hidden"])
    return cls(state_dim, space, rng=rng, **config)


def checkpoint_dict(policy: Policy, meta: dict | None = None) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": policy.kind,
        "state_dim": policy.state_dim,
        "atoms": list(policy.space.atoms),
        "frequency_order": [policy.space.atoms[i] for i in policy.space.frequency_order],
        "config": policy.config(),
        "params": {
            name: {"shape": list(p.shape), "data": [float(x) for x in p.data.reshape(-1)]}
            for name, p in policy.named_parameters()
        },
        "meta": meta or {},
    }


def policy_from_dict(obj: dict) -> Policy:
    if obj.get("format") != FORMAT:
        raise CheckpointError("not a dialpolicy checkpoint")
    if obj.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {obj.get('version')}")
    space = ActionSpace.from_json({"atoms": obj["atoms"], "frequency_order": obj["frequency_order"]})
    policy = build_policy(obj["kind"], int(obj["state_dim"]), space, obj["config"])
    state = {name: np.array(rec["data"], dtype=np.float64).reshape(rec["shape"])
             for name, rec in obj["params"].items()}
    policy.load_state_dict(state)
    return policy


def save_checkpoint(policy: Policy, path: str | Path, meta: dict | None = None) -> None:
    Path(path).write_text(json.dumps(checkpoint_dict(policy, meta)) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> Policy:
    return policy_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_checkpoint_meta(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8")).get("meta", {})
