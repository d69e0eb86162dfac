"""Experiment configuration: one JSON object, every field defaulted and overridable."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .adversarial import AdvTrainConfig
from .policies import POLICY_CLASSES, TrainConfig

METHODS = tuple(POLICY_CLASSES)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    # environment: a world JSON (schema + entities) or the built-in default
    world: str | None = None
    max_turns: int = 40
    # corpus: a gen-corpus output directory, or generate n_dialogues in memory
    corpus: str | None = None
    n_dialogues: int = 2000
    corpus_seed: int = 0
    method: str = "multidense"
    # architecture overrides per method, e.g. {"diaseq": {"hidden": 256}}
    policy: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    adversarial: dict = field(default_factory=dict)
    # a pretrained generator checkpoint for diaadv; "{seed}" is substituted
    pretrained: str | None = None
    allow_unpretrained: bool = False
    # checkpoint to evaluate; "{seed}" is substituted, "expert" evaluates the rule expert
    checkpoint: str | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    fraction: float = 1.0
    fractions: list[float] = field(default_factory=lambda: [0.1, 0.4, 0.7, 1.0])
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    pretrain_epochs: list[int] = field(default_factory=lambda: [0, 1, 2, 5, 10])
    episodes: int = 500
    val_episodes: int = 100
    write_episodes: bool = False
    out: str = "runs"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {list(METHODS)}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}")
        for f in [self.fraction, *self.fractions]:
            if not 0.0 < f <= 1.0:
                raise ConfigError(f"fraction {f} outside (0, 1]")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.episodes < 1 or self.val_episodes < 1 or self.n_dialogues < 1 or self.max_turns < 1:
            raise ConfigError("episodes, val_episodes, n_dialogues and max_turns must be positive")
        if not self.pretrain_epochs or any(e < 0 for e in self.pretrain_epochs):
            raise ConfigError("pretrain_epochs must be a non-empty list of non-negative budgets")
        unknown = set(self.policy) - set(METHODS)
        if unknown:
            raise ConfigError(f"policy overrides for unknown methods {sorted(unknown)}")
        try:
            self.train_config()
            self.adv_config()
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.train)

    def adv_config(self) -> AdvTrainConfig:
        return AdvTrainConfig(**self.adversarial)

    def policy_config(self, method: str) -> dict:
        return dict(self.policy.get(method, {}))

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**obj)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_json(obj)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")

    def override(self, **kw) -> "ExperimentConfig":
        obj = self.to_json()
        obj.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig.from_json(obj)
