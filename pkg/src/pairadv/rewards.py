"""Accuracy-only rewards for judge outputs."""

from __future__ import annotations

from typing import Optional

from .model import KindMismatch, LabelKind, PreferenceLabel, label_sign


def _require(kind: LabelKind, *labels: PreferenceLabel) -> None:
    for lab in labels:
        if lab.kind is not kind:
            raise KindMismatch(f"expected {kind.value} label, got {lab}")


def binary_reward(predicted: PreferenceLabel, gold: PreferenceLabel) -> float:
    _require(LabelKind.BINARY, predicted, gold)
    return 1.0 if predicted.value == gold.value else 0.0


def multiclass_reward(predicted: PreferenceLabel, gold: PreferenceLabel) -> float:
    """Full credit for the exact strength, half credit for the right direction."""
    _require(LabelKind.MULTICLASS, predicted, gold)
    if predicted.value == gold.value:
        return 1.0
    if label_sign(predicted) == label_sign(gold):
        return 0.5
    return 0.0


def rule_reward(predicted: Optional[PreferenceLabel], gold: PreferenceLabel) -> float:
    """Dispatch on the gold label's kind. ``None`` stands for an unparseable answer."""
    if predicted is None:
        return 0.0
    if gold.kind is LabelKind.BINARY:
        return binary_reward(predicted, gold)
    return multiclass_reward(predicted, gold)
