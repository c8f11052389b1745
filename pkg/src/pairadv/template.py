"""Judge prompt rendering and answer-tag parsing."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable

from .model import (
    Judgment,
    LabelKind,
    PairAdvError,
    PreferenceExample,
    PreferenceLabel,
    count_tokens as default_counter,
    validate_example,
)

CRITERIA = ("Helpfulness", "Correctness", "Coherence", "Complexity", "Verbosity", "Safety")

_ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)
_SLOT_RE = re.compile(r"\{(context|response1|response2)\}")


class ParseError(PairAdvError):
    NO_TAG = "NoTag"
    BAD_PAYLOAD = "BadPayload"

    def __init__(self, reason: str, raw: str, payload: str | None = None):
        self.reason = reason
        self.raw = raw
        self.payload = payload
        detail = f" payload={payload!r}" if payload is not None else ""
        super().__init__(f"{reason}{detail}")


@dataclass(frozen=True)
class TaskInstruction:
    kind: LabelKind
    system_text: str
    user_text: str

    def messages(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": self.user_text},
        ]


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("pairadv").joinpath("templates", name).read_text(encoding="utf-8")


def system_text(kind: LabelKind) -> str:
    kind = LabelKind(kind)
    return load_template(f"{kind.value}_system.txt")


def render_pair(kind: LabelKind, context: str, response_a: str, response_b: str) -> TaskInstruction:
    slots = {"context": context, "response1": response_a, "response2": response_b}
    # single pass, so placeholder-like text inside a response is left alone
    user = _SLOT_RE.sub(lambda m: slots[m.group(1)], load_template("user.txt"))
    return TaskInstruction(LabelKind(kind), system_text(kind), user)


def render_prompt(kind: LabelKind, ex: PreferenceExample) -> TaskInstruction:
    validate_example(ex)
    return render_pair(kind, ex.context, ex.response_a, ex.response_b)


def _payload_to_label(kind: LabelKind, payload: str, raw: str) -> PreferenceLabel:
    text = payload.strip()
    if kind is LabelKind.BINARY:
        if text in ("A", "B"):
            return PreferenceLabel.binary(text)
        raise ParseError(ParseError.BAD_PAYLOAD, raw, payload)
    if re.fullmatch(r"[+-]?\d+", text):
        value = int(text)
        if value != 0 and -3 <= value <= 3:
            return PreferenceLabel.multiclass(value)
    raise ParseError(ParseError.BAD_PAYLOAD, raw, payload)


def parse_judgment(kind: LabelKind, raw: str,
                   counter: Callable[[str], int] = default_counter) -> Judgment:
    """Read the verdict from the last ``<answer>`` tag of a judge output."""
    kind = LabelKind(kind)
    matches = list(_ANSWER_RE.finditer(raw))
    if not matches:
        raise ParseError(ParseError.NO_TAG, raw)
    last = matches[-1]
    label = _payload_to_label(kind, last.group(1), raw)
    reasoning = (raw[: last.start()] + raw[last.end():]).strip()
    return Judgment(reasoning=reasoning, reasoning_len=counter(reasoning), label=label)


def format_answer(label: PreferenceLabel) -> str:
    return f"<answer>{label.value}</answer>"
