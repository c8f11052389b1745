import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pairadv.model import (
    LabelKind,
    PreferenceExample,
    PreferenceLabel,
    TrajectoryRecord,
    ValidationError,
    all_labels,
    flatten_turns,
    label_sign,
    validate_dataset,
    validate_example,
    whitespace_tokens,
)


def test_well_formed_example_validates(example):
    assert validate_example(example) is None


def test_empty_response_b_is_named(example):
    bad = dataclasses.replace(example, response_b="")
    with pytest.raises(ValidationError) as err:
        validate_example(bad)
    assert err.value.field == "response_b"


def test_zero_strength_is_rejected_as_gold_label(example):
    bad = dataclasses.replace(example, gold_label=PreferenceLabel.unchecked(LabelKind.MULTICLASS, 0))
    with pytest.raises(ValidationError) as err:
        validate_example(bad)
    assert err.value.field == "gold_label"


@pytest.mark.parametrize("value", [0, 4, -4, 1.5, True])
def test_multiclass_constructor_rejects(value):
    with pytest.raises(ValidationError):
        PreferenceLabel.multiclass(value)


@pytest.mark.parametrize("value", ["a", "C", "", None])
def test_binary_constructor_rejects(value):
    with pytest.raises(ValidationError):
        PreferenceLabel.binary(value)


def test_duplicate_ids_rejected(example):
    with pytest.raises(ValidationError):
        validate_dataset([example, example])


@pytest.mark.parametrize("label, sign", [
    (PreferenceLabel.multiclass(-2), -1),
    (PreferenceLabel.multiclass(3), 1),
    (PreferenceLabel.multiclass(-1), -1),
    (PreferenceLabel.binary("A"), -1),
    (PreferenceLabel.binary("B"), 1),
])
def test_label_sign(label, sign):
    assert label_sign(label) == sign


def test_label_sign_total_and_nonzero():
    assert all(label_sign(lab) in (-1, 1) for lab in all_labels())
    assert len(all_labels()) == 8


@given(st.sampled_from(all_labels()))
def test_flip_negates_sign_and_is_involution(label):
    assert label_sign(label.flipped()) == -label_sign(label)
    assert label.flipped().flipped() == label


def test_trajectory_length_from_whitespace():
    rec = TrajectoryRecord.from_text("x", "one  two\nthree ", PreferenceLabel.binary("B"))
    assert rec.reasoning_len == 3 == whitespace_tokens(rec.reasoning)


def test_negative_length_rejected():
    with pytest.raises(ValidationError):
        TrajectoryRecord("x", "", -1, PreferenceLabel.binary("A"))


def test_flatten_turns():
    turns = [{"role": "user", "content": "hi"}, {"role": "assistant", "content": "hey"}]
    assert flatten_turns(turns) == "User: hi\nAssistant: hey"


def test_example_is_immutable(example):
    with pytest.raises(dataclasses.FrozenInstanceError):
        example.context = "x"  # type: ignore[misc]


def test_binary_accessors():
    lab = PreferenceLabel.binary("A")
    assert lab.binary_value == "A" and lab.multiclass_value is None
    lab = PreferenceLabel.multiclass(2)
    assert lab.multiclass_value == 2 and lab.binary_value is None
    assert PreferenceExample  # re-exported type stays importable
