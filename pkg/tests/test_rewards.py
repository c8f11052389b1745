import pytest
from hypothesis import given
from hypothesis import strategies as st

from pairadv.model import KindMismatch, LabelKind, PreferenceLabel, all_labels
from pairadv.rewards import binary_reward, multiclass_reward, rule_reward

A, B = PreferenceLabel.binary("A"), PreferenceLabel.binary("B")
M = PreferenceLabel.multiclass


@pytest.mark.parametrize("pred, gold, r", [(B, B, 1.0), (A, B, 0.0), (A, A, 1.0), (B, A, 0.0)])
def test_binary_table(pred, gold, r):
    assert binary_reward(pred, gold) == r


@pytest.mark.parametrize("pred, gold, r", [(2, 2, 1.0), (1, 3, 0.5), (-1, 2, 0.0), (-3, -1, 0.5)])
def test_multiclass_examples(pred, gold, r):
    assert multiclass_reward(M(pred), M(gold)) == r


def test_kind_mismatch():
    with pytest.raises(KindMismatch):
        binary_reward(M(1), A)
    with pytest.raises(KindMismatch):
        multiclass_reward(M(1), B)


def test_unparseable_scores_zero():
    assert rule_reward(None, A) == 0.0
    assert rule_reward(None, M(3)) == 0.0


multi = st.sampled_from(all_labels(LabelKind.MULTICLASS))
binary = st.sampled_from(all_labels(LabelKind.BINARY))


@given(multi, multi)
def test_multiclass_range_and_relabel_symmetry(p, g):
    r = multiclass_reward(p, g)
    assert r in (0.0, 0.5, 1.0)
    assert multiclass_reward(p.flipped(), g.flipped()) == r
    assert (r == 1.0) == (p == g)
    assert (r == 0.5) == ((p.value > 0) == (g.value > 0) and p != g)


@given(binary, binary)
def test_binary_range_and_relabel_symmetry(p, g):
    r = binary_reward(p, g)
    assert r in (0.0, 1.0)
    assert binary_reward(p.flipped(), g.flipped()) == r
