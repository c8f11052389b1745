"""Run configuration: one JSON document holding every knob of an experiment."""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from typing import Any

from .advantage import AdvConfig
from .curation import CurationConfig
from .judge import RemoteJudgeConfig, SimJudgeConfig, VoteConfig
from .model import LabelKind, ValidationError
from .trainer import TrainConfig


@dataclass(frozen=True)
class JudgeSettings:
    backend: str = "sim"  # "sim" or "remote"
    kind: LabelKind = LabelKind.BINARY
    sim: SimJudgeConfig = SimJudgeConfig()
    remote: RemoteJudgeConfig = RemoteJudgeConfig()

    def __post_init__(self):
        object.__setattr__(self, "kind", LabelKind(self.kind))
        if self.backend not in ("sim", "remote"):
            raise ValidationError("judge.backend", f"unknown backend {self.backend!r}")


@dataclass(frozen=True)
class TaskSettings:
    vocab_size: int = 8
    seq_len: int = 4

    def __post_init__(self):
        if self.vocab_size < 2 or self.seq_len < 1:
            raise ValidationError("task", "need vocab_size >= 2 and seq_len >= 1")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    curation: CurationConfig = CurationConfig()
    judge: JudgeSettings = JudgeSettings()
    vote: VoteConfig = VoteConfig()
    # RLHF runs use groups of 4; judge RL would use 8
    train: TrainConfig = TrainConfig(group_size=4, steps=500)
    adv: AdvConfig = AdvConfig()
    task: TaskSettings = TaskSettings()
    adv_mode: str = "pairwise"
    strict: bool = True
    inputs: dict = field(default_factory=dict)

    def resolved_train(self) -> TrainConfig:
        """Training config with the master seed and the shared epsilon applied."""
        return dataclasses.replace(self.train, seed=self.seed, adv=self.adv)


_SECRET_FIELDS = {"token"}


def _plain(obj) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if f.name not in _SECRET_FIELDS}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    return obj


def to_dict(cfg: RunConfig) -> dict:
    return _plain(cfg)


_NESTED = {
    RunConfig: {"curation": CurationConfig, "judge": JudgeSettings, "vote": VoteConfig,
                "train": TrainConfig, "adv": AdvConfig, "task": TaskSettings},
    JudgeSettings: {"sim": SimJudgeConfig, "remote": RemoteJudgeConfig},
    TrainConfig: {"adv": AdvConfig},
}


def _build(cls, data: dict, base=None, path: str = ""):
    if not isinstance(data, dict):
        raise ValidationError(path or "config", "expected an object")
    base = base if base is not None else cls()
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValidationError(path or "config", f"unknown key(s): {', '.join(sorted(unknown))}")
    updates = {}
    for key, value in data.items():
        sub = _NESTED.get(cls, {}).get(key)
        if sub is not None:
            updates[key] = _build(sub, value, getattr(base, key), f"{path}{key}.")
        else:
            updates[key] = value
    try:
        return dataclasses.replace(base, **updates)
    except TypeError as e:
        raise ValidationError(path or "config", str(e)) from None


def from_dict(data: dict, base: RunConfig | None = None) -> RunConfig:
    return _build(RunConfig, data, base)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh))


def dumps(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"


def override(cfg: RunConfig, dotted: dict) -> RunConfig:
    """Apply ``{"train.lr": 0.1, ...}`` style overrides, skipping ``None`` values."""
    nested: dict = {}
    for key, value in dotted.items():
        if value is None:
            continue
        node = nested
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return from_dict(nested, cfg)
