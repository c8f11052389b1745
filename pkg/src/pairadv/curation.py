"""Warm-up SFT data selection from pre-generated judge trajectories."""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Union

from .model import PairAdvError, PreferenceExample, TrajectoryRecord, ValidationError


class IdMismatch(PairAdvError):
    pass


class Strategy(str, enum.Enum):
    LONGEST_CORRECT = "longest"
    SHORTEST_CORRECT = "shortest"


@dataclass(frozen=True)
class CurationConfig:
    strategy: Strategy = Strategy.LONGEST_CORRECT
    min_trajectories: int = 10

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.min_trajectories < 1:
            raise ValidationError("min_trajectories", "must be >= 1")


@dataclass(frozen=True)
class WarmupExample:
    example: PreferenceExample
    chosen: TrajectoryRecord


@dataclass(frozen=True)
class Discarded:
    example_id: str


@dataclass
class CurationReport:
    kept: int = 0
    discarded: int = 0
    discarded_ids: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.kept + self.discarded

    @property
    def discard_rate(self) -> float:
        return self.discarded / self.total if self.total else 0.0

    def summary(self) -> str:
        return f"kept={self.kept} discarded={self.discarded} rate={self.discard_rate:.4f}"


def select_warmup_trajectory(
    ex: PreferenceExample, trajs: list[TrajectoryRecord], cfg: CurationConfig
) -> Union[WarmupExample, Discarded]:
    for t in trajs:
        if t.example_id != ex.id:
            raise IdMismatch(f"trajectory for {t.example_id!r} passed with example {ex.id!r}")
    correct = [t for t in trajs if t.predicted_label == ex.gold_label]
    if not correct:
        return Discarded(ex.id)
    # max/min return the first extremal element, which gives the input-order tie-break
    pick = max if cfg.strategy is Strategy.LONGEST_CORRECT else min
    return WarmupExample(ex, pick(correct, key=lambda t: t.reasoning_len))


def build_warmup_dataset(
    examples: Iterable[PreferenceExample],
    trajectories: Iterable[TrajectoryRecord],
    cfg: CurationConfig,
) -> tuple[list[WarmupExample], CurationReport]:
    examples = list(examples)
    known = {ex.id for ex in examples}
    by_id: dict[str, list[TrajectoryRecord]] = defaultdict(list)
    for t in trajectories:
        if t.example_id not in known:
            raise IdMismatch(f"trajectory references unknown example {t.example_id!r}")
        by_id[t.example_id].append(t)

    kept: list[WarmupExample] = []
    report = CurationReport()
    for ex in examples:
        trajs = by_id.get(ex.id, [])
        if len(trajs) < cfg.min_trajectories:
            report.warnings.append(
                f"{ex.id}: {len(trajs)} trajectories, expected {cfg.min_trajectories}")
        result = select_warmup_trajectory(ex, trajs, cfg)
        if isinstance(result, Discarded):
            report.discarded += 1
            report.discarded_ids.append(ex.id)
        else:
            kept.append(result)
            report.kept += 1
    return kept, report
