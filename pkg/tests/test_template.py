import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import GOLDEN
from pairadv.model import LabelKind, PreferenceExample, PreferenceLabel, all_labels, flatten_turns
from pairadv.template import CRITERIA, ParseError, format_answer, parse_judgment, render_prompt


def golden(name):
    return (GOLDEN / name).read_text(encoding="utf-8")


@pytest.mark.parametrize("kind", [LabelKind.BINARY, LabelKind.MULTICLASS])
def test_system_text_matches_golden(kind, example):
    assert render_prompt(kind, example).system_text == golden(f"{kind.value}_system.txt")


def test_binary_system_ending(example):
    text = render_prompt(LabelKind.BINARY, example).system_text
    assert text.endswith("<answer>A</answer> if assistant A is better, and "
                         "<answer>B</answer> if assistant B is better.")


def test_multiclass_mentions_answer_tag(example):
    text = render_prompt(LabelKind.MULTICLASS, example).system_text
    assert "output your final score inside the <answer></answer> tag" in text
    for v in (-3, -2, -1, 1, 2, 3):
        assert sum(line.startswith(f"{v} if Assistant") for line in text.splitlines()) == 1


@pytest.mark.parametrize("kind", [LabelKind.BINARY, LabelKind.MULTICLASS])
def test_each_criterion_once(kind, example):
    text = render_prompt(kind, example).system_text
    for name in CRITERIA:
        assert text.count(name) == 1, name


def test_user_text_sections(example):
    lines = render_prompt(LabelKind.BINARY, example).user_text.splitlines()
    i = lines.index("[The Start of Context]")
    assert lines[i:i + 3] == ["[The Start of Context]", "hi", "[The End of Context]"]


def test_multiturn_user_text_matches_golden():
    context = flatten_turns([
        {"role": "user", "content": "What is 2+2?"},
        {"role": "assistant", "content": "4."},
        {"role": "user", "content": "And {response1} times 3?"},
    ])
    ex = PreferenceExample("g", context, "It is 12.", "Probably 13 or so.",
                           PreferenceLabel.binary("A"))
    assert render_prompt(LabelKind.BINARY, ex).user_text == golden("user_example.txt")


def test_render_is_deterministic(example):
    a = render_prompt(LabelKind.MULTICLASS, example)
    b = render_prompt(LabelKind.MULTICLASS, example)
    assert a == b


def test_messages_roles(example):
    msgs = render_prompt(LabelKind.BINARY, example).messages()
    assert [m["role"] for m in msgs] == ["system", "user"]


def test_parse_binary():
    j = parse_judgment(LabelKind.BINARY, "thinking hard about it <answer>B</answer>")
    assert j.label == PreferenceLabel.binary("B")
    assert j.reasoning == "thinking hard about it"
    assert j.reasoning_len == 4


def test_parse_multiclass_negative():
    j = parse_judgment(LabelKind.MULTICLASS, "A is far better.\n<answer>-3</answer>")
    assert j.label == PreferenceLabel.multiclass(-3)


def test_parse_no_tag():
    with pytest.raises(ParseError) as err:
        parse_judgment(LabelKind.BINARY, "Final answer: A")
    assert err.value.reason == ParseError.NO_TAG


@pytest.mark.parametrize("kind, payload", [
    (LabelKind.MULTICLASS, "0"), (LabelKind.BINARY, "C"), (LabelKind.BINARY, "maybe"),
    (LabelKind.BINARY, "a"), (LabelKind.MULTICLASS, "4"), (LabelKind.MULTICLASS, "two"),
])
def test_parse_bad_payload(kind, payload):
    with pytest.raises(ParseError) as err:
        parse_judgment(kind, f"hmm <answer>{payload}</answer>")
    assert err.value.reason == ParseError.BAD_PAYLOAD


def test_last_tag_wins():
    raw = "The format is <answer>A</answer> or <answer>B</answer>. I pick <answer> B </answer>"
    j = parse_judgment(LabelKind.BINARY, raw)
    assert j.label.value == "B"
    assert j.reasoning.startswith("The format is <answer>A</answer>")


@pytest.mark.parametrize("label, text", [
    (PreferenceLabel.binary("A"), "<answer>A</answer>"),
    (PreferenceLabel.multiclass(2), "<answer>2</answer>"),
    (PreferenceLabel.multiclass(-1), "<answer>-1</answer>"),
])
def test_format_answer(label, text):
    assert format_answer(label) == text


@given(st.sampled_from(all_labels()), st.text(alphabet=st.characters(blacklist_characters="<>")))
def test_parse_format_roundtrip(label, prefix):
    j = parse_judgment(label.kind, prefix + format_answer(label))
    assert j.label == label
