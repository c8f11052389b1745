"""JSONL datasets, matrix dumps and metric CSVs."""

from __future__ import annotations

import csv
import json
import logging
from typing import Callable, Iterable, Optional

from .advantage import PreferenceMatrix
from .curation import WarmupExample
from .model import (
    LabelKind,
    PairAdvError,
    PreferenceExample,
    PreferenceLabel,
    TrajectoryRecord,
    ValidationError,
    flatten_turns,
    validate_example,
    whitespace_tokens,
)
from .trainer import StepMetrics

log = logging.getLogger(__name__)

PREFERENCE_KEYS = ("id", "context", "response_a", "response_b", "gold_label")
TRAJECTORY_KEYS = ("example_id", "reasoning", "predicted_label")
WARMUP_KEYS = ("example_id", "reasoning", "label")
GROUP_KEYS = ("group_id", "context", "responses", "rewards")
METRIC_COLUMNS = ("step", "mean_true_reward", "mean_reward", "clip_frac", "kl", "judge_errors")


class SchemaError(PairAdvError):
    def __init__(self, message: str, line: Optional[int] = None, path: str = ""):
        self.line = line
        where = f"{path}:{line}: " if line is not None else ""
        super().__init__(where + message)


def label_to_json(label: PreferenceLabel) -> dict:
    return {"kind": label.kind.value, "value": str(label.value)}


def label_from_json(obj) -> PreferenceLabel:
    if not isinstance(obj, dict) or set(obj) != {"kind", "value"}:
        raise SchemaError("label must be an object with exactly 'kind' and 'value'")
    try:
        kind = LabelKind(obj["kind"])
    except ValueError:
        raise SchemaError(f"unknown label kind {obj['kind']!r}") from None
    value = obj["value"]
    try:
        if kind is LabelKind.BINARY:
            return PreferenceLabel.binary(value)
        if isinstance(value, bool) or not isinstance(value, (str, int)):
            raise SchemaError(f"bad multiclass value {value!r}")
        return PreferenceLabel.multiclass(int(value))
    except (ValueError, ValidationError) as e:
        raise SchemaError(f"invalid label value {value!r}: {e}") from None


def _check_keys(obj, required: tuple, strict: bool, optional: tuple = ()) -> None:
    if not isinstance(obj, dict):
        raise SchemaError("record must be a JSON object")
    missing = [k for k in required if k not in obj]
    if missing:
        raise SchemaError(f"missing field(s): {', '.join(missing)}")
    extra = sorted(set(obj) - set(required) - set(optional))
    if extra:
        if strict:
            raise SchemaError(f"unknown field(s): {', '.join(extra)}")
        log.warning("ignoring unknown field(s): %s", ", ".join(extra))


def _text(obj, key) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise SchemaError(f"{key} must be a string")
    return value


# --- preference examples -------------------------------------------------

def example_to_json(ex: PreferenceExample) -> dict:
    return {"id": ex.id, "context": ex.context, "response_a": ex.response_a,
            "response_b": ex.response_b, "gold_label": label_to_json(ex.gold_label)}


def example_from_json(obj, strict: bool = True) -> PreferenceExample:
    _check_keys(obj, PREFERENCE_KEYS, strict)
    context = obj["context"]
    if isinstance(context, list):
        context = flatten_turns(context)
    elif not isinstance(context, str):
        raise SchemaError("context must be a string or a list of turns")
    ex = PreferenceExample(_text(obj, "id"), context, _text(obj, "response_a"),
                           _text(obj, "response_b"), label_from_json(obj["gold_label"]))
    try:
        validate_example(ex)
    except ValidationError as e:
        raise SchemaError(str(e)) from None
    return ex


# --- trajectories and warm-up records ------------------------------------

def trajectory_to_json(t: TrajectoryRecord) -> dict:
    return {"example_id": t.example_id, "reasoning": t.reasoning,
            "predicted_label": label_to_json(t.predicted_label)}


def trajectory_from_json(obj, strict: bool = True,
                         counter: Callable[[str], int] = whitespace_tokens) -> TrajectoryRecord:
    _check_keys(obj, TRAJECTORY_KEYS, strict)
    return TrajectoryRecord.from_text(_text(obj, "example_id"), _text(obj, "reasoning"),
                                      label_from_json(obj["predicted_label"]), counter)


def warmup_to_json(w: WarmupExample) -> dict:
    return {"example_id": w.example.id, "reasoning": w.chosen.reasoning,
            "label": label_to_json(w.chosen.predicted_label)}


def warmup_from_json(obj, strict: bool = True) -> dict:
    _check_keys(obj, WARMUP_KEYS, strict)
    return {"example_id": _text(obj, "example_id"), "reasoning": _text(obj, "reasoning"),
            "label": label_from_json(obj["label"])}


def group_from_json(obj, strict: bool = True) -> dict:
    _check_keys(obj, GROUP_KEYS[:3], strict, optional=("rewards",))
    responses = obj["responses"]
    if not isinstance(responses, list) or not all(isinstance(r, str) for r in responses):
        raise SchemaError("responses must be a list of strings")
    rewards = obj.get("rewards")
    if rewards is not None and (not isinstance(rewards, list) or len(rewards) != len(responses)):
        raise SchemaError("rewards must be a list with one number per response")
    return {"group_id": str(obj["group_id"]), "context": _text(obj, "context"),
            "responses": responses, "rewards": rewards}


# --- generic JSONL -------------------------------------------------------

def read_jsonl(path, parse: Callable, strict: bool = True) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(parse(json.loads(line), strict))
            except json.JSONDecodeError as e:
                raise SchemaError(f"invalid JSON: {e.msg}", lineno, str(path)) from None
            except SchemaError as e:
                raise SchemaError(str(e), lineno, str(path)) from None
    return out


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_dataset(path, strict: bool = True) -> list[PreferenceExample]:
    examples = read_jsonl(path, example_from_json, strict)
    seen = set()
    for i, ex in enumerate(examples):
        if ex.id in seen:
            raise SchemaError(f"duplicate id {ex.id!r}", i + 1, str(path))
        seen.add(ex.id)
    return examples


def save_dataset(path, examples: Iterable[PreferenceExample]) -> None:
    write_jsonl(path, (example_to_json(ex) for ex in examples))


def load_trajectories(path, strict: bool = True) -> list[TrajectoryRecord]:
    return read_jsonl(path, trajectory_from_json, strict)


def save_trajectories(path, trajs: Iterable[TrajectoryRecord]) -> None:
    write_jsonl(path, (trajectory_to_json(t) for t in trajs))


def save_warmup(path, data: Iterable[WarmupExample]) -> None:
    write_jsonl(path, (warmup_to_json(w) for w in data))


def load_warmup(path, strict: bool = True) -> list[dict]:
    return read_jsonl(path, warmup_from_json, strict)


def load_groups(path, strict: bool = True) -> list[dict]:
    return read_jsonl(path, group_from_json, strict)


def save_matrices(path, matrices: Iterable[PreferenceMatrix]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for m in matrices:
            fh.write(m.to_json() + "\n")


def load_matrices(path) -> list[PreferenceMatrix]:
    with open(path, encoding="utf-8") as fh:
        return [PreferenceMatrix.from_json(line) for line in fh if line.strip()]


# --- metrics -------------------------------------------------------------

def write_metrics(path, metrics: Iterable[StepMetrics]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for m in metrics:
            w.writerow([getattr(m, c) for c in METRIC_COLUMNS])


def read_metrics(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRIC_COLUMNS:
            raise SchemaError(f"unexpected metrics header {reader.fieldnames}", 1, str(path))
        rows = []
        for row in reader:
            rows.append({k: (int(v) if k in ("step", "judge_errors") else float(v))
                         for k, v in row.items()})
        return rows
