"""Domain types shared across the package."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional, Union


class PairAdvError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PairAdvError):
    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class KindMismatch(PairAdvError):
    pass


class LabelKind(str, enum.Enum):
    BINARY = "binary"
    MULTICLASS = "multiclass"


MULTICLASS_VALUES = (-3, -2, -1, 1, 2, 3)
BINARY_VALUES = ("A", "B")


@dataclass(frozen=True)
class PreferenceLabel:
    """A judge verdict over a response pair.

    Binary labels carry ``"A"`` or ``"B"``; multiclass labels carry an integer
    strength in {-3, -2, -1, 1, 2, 3}, negative meaning response A is better.
    """

    kind: LabelKind
    value: Union[str, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", LabelKind(self.kind))
        if self.kind is LabelKind.BINARY:
            if self.value not in BINARY_VALUES:
                raise ValidationError("label", f"binary value must be A or B, got {self.value!r}")
        else:
            if isinstance(self.value, bool) or not isinstance(self.value, int):
                raise ValidationError("label", f"multiclass value must be int, got {self.value!r}")
            if self.value not in MULTICLASS_VALUES:
                raise ValidationError("label", f"multiclass value out of scale: {self.value}")

    @classmethod
    def unchecked(cls, kind: LabelKind, value) -> "PreferenceLabel":
        """Build a label without validation; ``validate_example`` reports it later."""
        label = object.__new__(cls)
        object.__setattr__(label, "kind", LabelKind(kind))
        object.__setattr__(label, "value", value)
        return label

    @classmethod
    def binary(cls, value: str) -> "PreferenceLabel":
        return cls(LabelKind.BINARY, value)

    @classmethod
    def multiclass(cls, value: int) -> "PreferenceLabel":
        return cls(LabelKind.MULTICLASS, value)

    @property
    def binary_value(self) -> Optional[str]:
        return self.value if self.kind is LabelKind.BINARY else None

    @property
    def multiclass_value(self) -> Optional[int]:
        return self.value if self.kind is LabelKind.MULTICLASS else None

    def flipped(self) -> "PreferenceLabel":
        """The same verdict with the A/B roles exchanged."""
        if self.kind is LabelKind.BINARY:
            return PreferenceLabel.binary("B" if self.value == "A" else "A")
        return PreferenceLabel.multiclass(-self.value)

    def __str__(self) -> str:
        return f"{self.kind.value}({self.value})"


def all_labels(kind: Optional[LabelKind] = None) -> list[PreferenceLabel]:
    out = []
    if kind in (None, LabelKind.BINARY):
        out += [PreferenceLabel.binary(v) for v in BINARY_VALUES]
    if kind in (None, LabelKind.MULTICLASS):
        out += [PreferenceLabel.multiclass(v) for v in MULTICLASS_VALUES]
    return out


def label_sign(label: PreferenceLabel) -> int:
    """-1 when the label favours response A, +1 when it favours B."""
    if label.kind is LabelKind.BINARY:
        return -1 if label.value == "A" else 1
    return -1 if label.value < 0 else 1


def whitespace_tokens(text: str) -> int:
    return len(text.split())


def char_tokens(text: str) -> int:
    return len(text)


TOKEN_COUNTERS: dict[str, Callable[[str], int]] = {
    "whitespace": whitespace_tokens,
    "chars": char_tokens,
}

# Length convention used for reasoning traces unless a caller overrides it.
count_tokens: Callable[[str], int] = whitespace_tokens


@dataclass(frozen=True)
class PreferenceExample:
    id: str
    context: str
    response_a: str
    response_b: str
    gold_label: PreferenceLabel


@dataclass(frozen=True)
class Judgment:
    reasoning: str
    reasoning_len: int
    label: PreferenceLabel


@dataclass(frozen=True)
class TrajectoryRecord:
    example_id: str
    reasoning: str
    reasoning_len: int
    predicted_label: PreferenceLabel

    def __post_init__(self) -> None:
        if self.reasoning_len < 0:
            raise ValidationError("reasoning_len", "must be non-negative")

    @classmethod
    def from_text(cls, example_id: str, reasoning: str, predicted_label: PreferenceLabel,
                  counter: Callable[[str], int] = whitespace_tokens) -> "TrajectoryRecord":
        return cls(example_id, reasoning, counter(reasoning), predicted_label)


def validate_example(ex: PreferenceExample) -> None:
    """Raise ValidationError naming the first violated field."""
    for name in ("id", "context", "response_a", "response_b"):
        value = getattr(ex, name)
        if not isinstance(value, str) or not value.strip():
            raise ValidationError(name, "must be a non-empty string")
    if not isinstance(ex.gold_label, PreferenceLabel):
        raise ValidationError("gold_label", "not a PreferenceLabel")
    lab = ex.gold_label
    if lab.kind is LabelKind.MULTICLASS and lab.value not in MULTICLASS_VALUES:
        raise ValidationError("gold_label", f"multiclass value {lab.value!r} not in scale")
    if lab.kind is LabelKind.BINARY and lab.value not in BINARY_VALUES:
        raise ValidationError("gold_label", f"binary value {lab.value!r} not A/B")


def validate_dataset(examples: list[PreferenceExample]) -> None:
    seen = set()
    for ex in examples:
        validate_example(ex)
        if ex.id in seen:
            raise ValidationError("id", f"duplicate id {ex.id!r}")
        seen.add(ex.id)


def flatten_turns(turns: list[dict]) -> str:
    """Serialize a multi-turn conversation into one context string."""
    names = {"user": "User", "assistant": "Assistant", "system": "System"}
    lines = []
    for turn in turns:
        role = names.get(turn["role"], str(turn["role"]).capitalize())
        lines.append(f"{role}: {turn['content']}")
    return "\n".join(lines)
