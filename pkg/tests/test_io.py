import json

import pytest

from pairadv.advantage import PreferenceMatrix
from pairadv.io import (
    METRIC_COLUMNS,
    SchemaError,
    label_from_json,
    load_dataset,
    load_groups,
    load_matrices,
    load_trajectories,
    read_metrics,
    save_dataset,
    save_matrices,
    save_trajectories,
    write_metrics,
)
from pairadv.model import PreferenceExample, PreferenceLabel, TrajectoryRecord, all_labels
from pairadv.trainer import StepMetrics


def examples():
    return [
        PreferenceExample("a1", "User: hi\nAssistant: yo", "Réponse A", "resp B",
                          PreferenceLabel.binary("B")),
        PreferenceExample("a2", "ctx", "x", "y", PreferenceLabel.multiclass(-2)),
    ]


def test_dataset_roundtrip_byte_identical(tmp_path):
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_dataset(first, examples())
    loaded = load_dataset(first)
    assert loaded == examples()
    save_dataset(second, loaded)
    assert first.read_bytes() == second.read_bytes()


def test_key_order_and_label_shape(tmp_path):
    path = tmp_path / "d.jsonl"
    save_dataset(path, examples()[1:])
    rec = json.loads(path.read_text())
    assert list(rec) == ["id", "context", "response_a", "response_b", "gold_label"]
    assert rec["gold_label"] == {"kind": "multiclass", "value": "-2"}


def test_missing_gold_label_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = {"id": "x", "context": "c", "response_a": "a", "response_b": "b",
            "gold_label": {"kind": "binary", "value": "A"}}
    bad = {k: v for k, v in good.items() if k != "gold_label"}
    bad["id"] = "y"
    path.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n")
    with pytest.raises(SchemaError) as err:
        load_dataset(path)
    assert err.value.line == 2 and "gold_label" in str(err.value)


def test_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_dataset(path) == []


def test_unknown_fields_strict_vs_lenient(tmp_path):
    path = tmp_path / "extra.jsonl"
    rec = {"id": "x", "context": "c", "response_a": "a", "response_b": "b",
           "gold_label": {"kind": "binary", "value": "A"}, "source": "web"}
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(SchemaError):
        load_dataset(path)
    assert load_dataset(path, strict=False)[0].id == "x"


def test_duplicate_ids(tmp_path):
    path = tmp_path / "dup.jsonl"
    save_dataset(path, [examples()[0], examples()[0]])
    with pytest.raises(SchemaError) as err:
        load_dataset(path)
    assert err.value.line == 2


def test_invalid_json_line(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_text("{not json\n")
    with pytest.raises(SchemaError) as err:
        load_dataset(path)
    assert err.value.line == 1


def test_multiturn_context_is_flattened(tmp_path):
    path = tmp_path / "turns.jsonl"
    rec = {"id": "t", "response_a": "a", "response_b": "b",
           "context": [{"role": "user", "content": "q"}, {"role": "assistant", "content": "r"}],
           "gold_label": {"kind": "binary", "value": "A"}}
    path.write_text(json.dumps(rec) + "\n")
    assert load_dataset(path)[0].context == "User: q\nAssistant: r"


@pytest.mark.parametrize("label", all_labels())
def test_label_json_roundtrip(label):
    from pairadv.io import label_to_json
    assert label_from_json(label_to_json(label)) == label


@pytest.mark.parametrize("obj", [
    {"kind": "multiclass", "value": "0"}, {"kind": "binary", "value": "C"},
    {"kind": "ternary", "value": "A"}, {"kind": "binary"}, "A",
])
def test_bad_labels(obj):
    with pytest.raises(SchemaError):
        label_from_json(obj)


def test_trajectory_roundtrip(tmp_path):
    path = tmp_path / "t.jsonl"
    trajs = [TrajectoryRecord.from_text("a1", "one two three", PreferenceLabel.binary("A"))]
    save_trajectories(path, trajs)
    back = load_trajectories(path)
    assert back == trajs and back[0].reasoning_len == 3


def test_groups(tmp_path):
    path = tmp_path / "g.jsonl"
    path.write_text(json.dumps({"group_id": "g", "context": "c", "responses": ["x", "y"]}) + "\n"
                    + json.dumps({"group_id": 2, "context": "c", "responses": ["x"],
                                  "rewards": [1, 2]}) + "\n")
    with pytest.raises(SchemaError) as err:
        load_groups(path)
    assert err.value.line == 2


def test_matrix_file_roundtrip(tmp_path):
    path = tmp_path / "m.jsonl"
    mats = [PreferenceMatrix.from_rewards([0.1, 0.7, 0.3], "g0"),
            PreferenceMatrix.from_rewards([1.0, -1.0], "g1")]
    save_matrices(path, mats)
    back = load_matrices(path)
    assert [m.group_id for m in back] == ["g0", "g1"]
    assert all((a.entries == b.entries).all() for a, b in zip(mats, back))
    rec = json.loads(path.read_text().splitlines()[1])
    assert rec == {"group_id": "g1", "G": 2, "entries": [0.0, 2.0, -2.0, 0.0]}


def test_metrics_csv(tmp_path):
    path = tmp_path / "metrics.csv"
    rows = [StepMetrics(0, 0.125, 0.1, 0.8, 0.0, 0.0, 0), StepMetrics(1, 0.2, 0.3, 0.7, 0.5, 1e-3, 2)]
    write_metrics(path, rows)
    assert path.read_text().splitlines()[0] == ",".join(METRIC_COLUMNS)
    back = read_metrics(path)
    assert back[1] == {"step": 1, "mean_true_reward": 0.2, "mean_reward": 0.3, "clip_frac": 0.5,
                       "kl": 1e-3, "judge_errors": 2}
