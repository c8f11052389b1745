import dataclasses
import itertools
import json
import math
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairadv.judge import (
    EmptyBallot,
    JudgeError,
    NegativeGap,
    RemoteJudge,
    RemoteJudgeConfig,
    SimJudgeConfig,
    SimulatedJudge,
    VoteConfig,
    evaluate_judge,
    majority_vote,
    p_correct,
    reasoning_length,
    remote_judge,
    sim_judge,
    strength,
    voted_accuracy_binomial,
)
from pairadv.model import (
    KindMismatch,
    Judgment,
    LabelKind,
    PreferenceExample,
    PreferenceLabel,
    ValidationError,
    all_labels,
    whitespace_tokens,
)

A, B = PreferenceLabel.binary("A"), PreferenceLabel.binary("B")
M = PreferenceLabel.multiclass


# --- simulated judge -------------------------------------------------------

def test_coin_flip_at_zero_gap():
    assert p_correct(0.0, SimJudgeConfig(p_max=0.9)) == 0.5


def test_limits_at_large_gap():
    cfg = SimJudgeConfig(p_max=1.0, kappa=5.0, len_min=100, len_max=1000, lam=2.0)
    assert p_correct(1e6, cfg) == 1.0
    assert reasoning_length(1e6, cfg) == 100
    rng = np.random.default_rng(0)
    ex_gold = PreferenceExample("x", "c", "a", "b", B)
    assert all(sim_judge(ex_gold, 1e6, cfg, rng).label == B for _ in range(200))


def test_length_at_zero_gap():
    cfg = SimJudgeConfig(len_min=100, len_max=1000)
    assert reasoning_length(0.0, cfg) == 1000


def test_negative_gap(example):
    with pytest.raises(NegativeGap):
        sim_judge(example, -0.1, SimJudgeConfig(), np.random.default_rng(0))


def test_config_bounds():
    with pytest.raises(ValidationError):
        SimJudgeConfig(p_max=0.4)
    with pytest.raises(ValidationError):
        SimJudgeConfig(len_min=10, len_max=5)


def test_judgment_length_matches_tokens(example):
    j = sim_judge(example, 0.3, SimJudgeConfig(), np.random.default_rng(1))
    assert j.reasoning_len == whitespace_tokens(j.reasoning) == reasoning_length(0.3, SimJudgeConfig())


@given(st.floats(0, 5), st.floats(0, 5))
def test_length_monotone(g1, g2):
    cfg = SimJudgeConfig()
    lo, hi = sorted((g1, g2))
    assert reasoning_length(hi, cfg) <= reasoning_length(lo, cfg)


def test_multiclass_strength_buckets():
    cfg = SimJudgeConfig(magnitude_thresholds=(0.2, 0.5))
    assert [strength(g, cfg) for g in (0.0, 0.19, 0.2, 0.49, 0.5, 3.0)] == [1, 1, 2, 2, 3, 3]


@pytest.mark.parametrize("gap", [0.0, 0.05, 0.1, 0.3, 1.0])
def test_correct_frequency_converges(gap, example):
    cfg = SimJudgeConfig(p_max=0.9, kappa=8.0)
    rng = np.random.default_rng(int(gap * 1000))
    n = 10_000
    hits = sum(sim_judge(example, gap, cfg, rng).label == example.gold_label for _ in range(n))
    p = p_correct(gap, cfg)
    assert abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_simulated_pair_judge_orientation():
    judge = SimulatedJudge({"good": 1.0, "bad": 0.0}.__getitem__,
                           SimJudgeConfig(p_max=1.0, kappa=1e9), LabelKind.MULTICLASS,
                           np.random.default_rng(0))
    assert judge.judge_pair("", "good", "bad").label == M(-3)
    assert judge.judge_pair("", "bad", "good").label == M(3)


# --- voting --------------------------------------------------------------------

def test_strict_majority():
    assert majority_vote([A, A, B], VoteConfig(3), np.random.default_rng(0)) == A


def test_even_tie_is_seeded_and_fair():
    picks = [majority_vote([A, B], VoteConfig(2), np.random.default_rng(s)) for s in range(4000)]
    again = [majority_vote([A, B], VoteConfig(2), np.random.default_rng(s)) for s in range(4000)]
    assert picks == again
    frac = sum(p == A for p in picks) / len(picks)
    assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / len(picks))


def test_empty_and_mixed_ballots():
    with pytest.raises(EmptyBallot):
        majority_vote([], VoteConfig(1), np.random.default_rng(0))
    with pytest.raises(KindMismatch):
        majority_vote([A, M(1)], VoteConfig(2), np.random.default_rng(0))


def test_multiclass_value_majority():
    assert majority_vote([M(2), M(2), M(-1)], VoteConfig(3), np.random.default_rng(0)) == M(2)


def test_multiclass_sign_fallback():
    # no value has a strict majority; positives outnumber negatives, 1 is the top positive
    ballot = [M(1), M(1), M(3), M(-2), M(-2)]
    assert majority_vote(ballot, VoteConfig(5), np.random.default_rng(0)) == M(1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(all_labels(LabelKind.MULTICLASS)), min_size=1, max_size=9),
       st.integers(0, 2**31 - 1), st.randoms())
def test_vote_permutation_invariant(ballot, seed, rnd):
    shuffled = list(ballot)
    rnd.shuffle(shuffled)
    cfg = VoteConfig(len(ballot))
    assert (majority_vote(ballot, cfg, np.random.default_rng(seed))
            == majority_vote(shuffled, cfg, np.random.default_rng(seed)))


def binomial_oracle(p, m):
    """Independent brute force: enumerate every vote pattern."""
    total = 0.0
    for pattern in itertools.product((0, 1), repeat=m):
        k = sum(pattern)
        w = p ** k * (1 - p) ** (m - k)
        total += w if 2 * k > m else (0.5 * w if 2 * k == m else 0.0)
    return total


@pytest.mark.parametrize("p, m", [(0.8, 1), (0.8, 4), (0.7, 5), (0.6, 10), (0.8, 12)])
def test_binomial_formula_against_enumeration(p, m):
    assert voted_accuracy_binomial(p, m) == pytest.approx(binomial_oracle(p, m), abs=1e-12)


def test_binomial_m16_closed_form():
    p, q = 0.8, 0.2
    expected = sum(math.comb(16, k) * p**k * q**(16 - k) for k in range(9, 17))
    expected += 0.5 * math.comb(16, 8) * p**8 * q**8
    assert voted_accuracy_binomial(0.8, 16) == pytest.approx(expected, abs=1e-15)


def test_evaluate_judge_drops_failures(example):
    calls = iter([JudgeError("Parse", "x"), A, JudgeError("Transport", "y")])

    def flaky(ex):
        item = next(calls)
        if isinstance(item, Exception):
            raise item
        return Judgment("", 0, item)

    ev = evaluate_judge([example], flaky, VoteConfig(3), np.random.default_rng(0))
    assert (ev.correct, ev.parse_errors, ev.transport_errors) == (1, 1, 1)


# --- remote judge against a local stub server -------------------------------------

class _Stub(BaseHTTPRequestHandler):
    replies: list = []
    seen: list = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append((body, self.headers.get("Authorization")))
        reply = type(self).replies.pop(0) if type(self).replies else ""
        if reply is None:
            self.send_response(500)
            self.end_headers()
            return
        data = json.dumps({"choices": [{"message": {"role": "assistant", "content": reply}}]})
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(data.encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    _Stub.replies, _Stub.seen = [], []
    server = HTTPServer(("127.0.0.1", 0), _Stub)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions", _Stub
    server.shutdown()


def test_remote_passthrough(stub_server, example):
    url, stub = stub_server
    stub.replies = ["<answer>A</answer>"]
    cfg = RemoteJudgeConfig(url=url, model="m", token="sekret")
    j = remote_judge(example, LabelKind.BINARY, cfg)
    assert j.label == A
    body, auth = stub.seen[0]
    assert set(body) == {"model", "messages", "temperature", "max_tokens"}
    assert body["temperature"] == 0.6 and body["model"] == "m"
    assert [m["role"] for m in body["messages"]] == ["system", "user"]
    assert auth == "Bearer sekret"


def test_remote_garbage_is_parse_error(stub_server, example):
    url, stub = stub_server
    stub.replies = ["I refuse to answer"]
    with pytest.raises(JudgeError) as err:
        remote_judge(example, LabelKind.BINARY, RemoteJudgeConfig(url=url))
    assert err.value.kind == JudgeError.PARSE and err.value.raw == "I refuse to answer"


def test_remote_long_reasoning_length(stub_server, example):
    url, stub = stub_server
    stub.replies = ["tok " * 2000 + "<answer>B</answer>"]
    j = remote_judge(example, LabelKind.BINARY, RemoteJudgeConfig(url=url))
    assert j.reasoning_len == 2000


def test_remote_transport_error(stub_server, example):
    url, stub = stub_server
    stub.replies = [None]
    with pytest.raises(JudgeError) as err:
        remote_judge(example, LabelKind.BINARY, RemoteJudgeConfig(url=url))
    assert err.value.kind == JudgeError.TRANSPORT


def test_remote_unconfigured(example):
    with pytest.raises(JudgeError):
        remote_judge(example, LabelKind.BINARY, RemoteJudgeConfig(url=""))


def test_remote_env(monkeypatch):
    monkeypatch.setenv("PAIRADV_JUDGE_URL", "http://x/y")
    monkeypatch.setenv("PAIRADV_JUDGE_TOKEN", "t")
    cfg = RemoteJudgeConfig.from_env(model="judge-1")
    assert (cfg.url, cfg.token, cfg.model) == ("http://x/y", "t", "judge-1")


def test_judge_many_keeps_order(stub_server, example):
    url, stub = stub_server
    stub.replies = ["<answer>A</answer>"] * 6
    exs = [dataclasses.replace(example, id=f"e{i}") for i in range(6)]
    out = RemoteJudge(RemoteJudgeConfig(url=url, max_inflight=3)).judge_many(exs)
    assert all(j.label == A for j in out)
