"""Preference judges: a simulated GenRM, a remote chat-completion judge, and voting."""

from __future__ import annotations

import logging
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from itertools import cycle, islice
from typing import Callable, Optional, Protocol, Sequence, Union

import numpy as np
import requests

from .model import (
    Judgment,
    KindMismatch,
    LabelKind,
    PairAdvError,
    PreferenceExample,
    PreferenceLabel,
    ValidationError,
    label_sign,
)
from .template import ParseError, TaskInstruction, parse_judgment, render_pair, render_prompt

log = logging.getLogger(__name__)


class NegativeGap(PairAdvError):
    pass


class EmptyBallot(PairAdvError):
    pass


class JudgeError(PairAdvError):
    TRANSPORT = "Transport"
    PARSE = "Parse"

    def __init__(self, kind: str, message: str, raw: Optional[str] = None):
        self.kind = kind
        self.raw = raw
        super().__init__(f"{kind}: {message}")


class PairJudge(Protocol):
    kind: LabelKind

    def judge_pair(self, context: str, response_a: str, response_b: str) -> Judgment:
        ...


# --------------------------------------------------------------------------
# simulated judge
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SimJudgeConfig:
    p_max: float = 0.95
    kappa: float = 10.0
    len_min: int = 100
    len_max: int = 1000
    lam: float = 5.0
    # gap cut points separating multiclass strengths 1 | 2 | 3
    magnitude_thresholds: tuple[float, float] = (0.2, 0.5)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "magnitude_thresholds", tuple(self.magnitude_thresholds))
        # 0.5 is admitted: the pure-noise judge is a useful control
        if not 0.5 <= self.p_max <= 1.0:
            raise ValidationError("p_max", "must lie in [0.5, 1]")
        if self.kappa <= 0 or self.lam <= 0:
            raise ValidationError("kappa", "kappa and lam must be positive")
        if not 0 <= self.len_min <= self.len_max:
            raise ValidationError("len_min", "need 0 <= len_min <= len_max")
        lo, hi = self.magnitude_thresholds
        if not 0 <= lo <= hi:
            raise ValidationError("magnitude_thresholds", "must be non-decreasing")


def p_correct(gap: float, cfg: SimJudgeConfig) -> float:
    return 0.5 + (cfg.p_max - 0.5) * (1.0 - math.exp(-cfg.kappa * gap))


def reasoning_length(gap: float, cfg: SimJudgeConfig) -> int:
    return int(round(cfg.len_min + (cfg.len_max - cfg.len_min) * math.exp(-cfg.lam * gap)))


def strength(gap: float, cfg: SimJudgeConfig) -> int:
    lo, hi = cfg.magnitude_thresholds
    if gap < lo:
        return 1
    return 2 if gap < hi else 3


_FILLER = ("hmm", "compare", "the", "two", "responses", "carefully", "wait", "check", "again")


@lru_cache(maxsize=4096)
def filler_text(n_tokens: int) -> str:
    return " ".join(islice(cycle(_FILLER), n_tokens))


def _simulate(preferred_sign: int, gap: float, kind: LabelKind,
              cfg: SimJudgeConfig, rng: np.random.Generator) -> Judgment:
    if gap < 0:
        raise NegativeGap(f"true gap must be >= 0, got {gap}")
    correct = rng.random() < p_correct(gap, cfg)
    sign = preferred_sign if correct else -preferred_sign
    if kind is LabelKind.BINARY:
        label = PreferenceLabel.binary("B" if sign > 0 else "A")
    else:
        label = PreferenceLabel.multiclass(sign * strength(gap, cfg))
    n = reasoning_length(gap, cfg)
    return Judgment(reasoning=filler_text(n), reasoning_len=n, label=label)


def sim_judge(ex: PreferenceExample, true_gap: float, cfg: SimJudgeConfig,
              rng: np.random.Generator, kind: Optional[LabelKind] = None) -> Judgment:
    """Simulated judgment of ``ex`` whose better response leads by ``true_gap``.

    The gold label says which response is better. The verdict points that way
    with probability ``p_correct(true_gap)``; closer calls get longer reasoning.
    """
    kind = LabelKind(kind) if kind is not None else ex.gold_label.kind
    return _simulate(label_sign(ex.gold_label), true_gap, kind, cfg, rng)


class SimulatedJudge:
    """Pair judge backed by a hidden scalar reward over responses.

    Holds its own rng stream; not safe to call from several threads.
    """

    def __init__(self, reward_fn: Callable[[str], float], cfg: SimJudgeConfig,
                 kind: LabelKind = LabelKind.BINARY, rng: Optional[np.random.Generator] = None):
        self.reward_fn = reward_fn
        self.cfg = cfg
        self.kind = LabelKind(kind)
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)

    def judge_pair(self, context: str, response_a: str, response_b: str) -> Judgment:
        return self.judge_rewards(self.reward_fn(response_a), self.reward_fn(response_b))

    def judge_rewards(self, reward_a: float, reward_b: float) -> Judgment:
        gap = abs(reward_b - reward_a)
        return _simulate(1 if reward_b > reward_a else -1, gap, self.kind, self.cfg, self.rng)


# --------------------------------------------------------------------------
# remote judge
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RemoteJudgeConfig:
    url: str = ""
    model: str = "judge"
    token: str = ""
    temperature: float = 0.6
    top_p: float = 1.0
    max_tokens: int = 2048
    timeout: float = 120.0
    max_retries: int = 3
    max_inflight: int = 4

    @classmethod
    def from_env(cls, **overrides) -> "RemoteJudgeConfig":
        env = {"url": os.environ.get("PAIRADV_JUDGE_URL", ""),
               "token": os.environ.get("PAIRADV_JUDGE_TOKEN", "")}
        env.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**env)


def request_body(instruction: TaskInstruction, cfg: RemoteJudgeConfig) -> dict:
    body = {
        "model": cfg.model,
        "messages": instruction.messages(),
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
    }
    if cfg.top_p != 1.0:
        body["top_p"] = cfg.top_p
    return body


def _post(instruction: TaskInstruction, cfg: RemoteJudgeConfig,
          session: Optional[requests.Session]) -> str:
    if not cfg.url:
        raise JudgeError(JudgeError.TRANSPORT, "no endpoint configured (PAIRADV_JUDGE_URL)")
    headers = {"Content-Type": "application/json"}
    if cfg.token:
        headers["Authorization"] = f"Bearer {cfg.token}"
    post = session.post if session is not None else requests.post
    try:
        resp = post(cfg.url, json=request_body(instruction, cfg), headers=headers,
                    timeout=cfg.timeout)
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]
    except (requests.RequestException, ValueError, KeyError, IndexError, TypeError) as e:
        raise JudgeError(JudgeError.TRANSPORT, f"{type(e).__name__}: {e}") from e


def _parse_or_raise(kind: LabelKind, raw: str) -> Judgment:
    try:
        return parse_judgment(kind, raw)
    except ParseError as e:
        raise JudgeError(JudgeError.PARSE, str(e), raw=raw) from e


def remote_judge(ex: PreferenceExample, kind: LabelKind, cfg: RemoteJudgeConfig,
                 session: Optional[requests.Session] = None) -> Judgment:
    """One chat-completion call for ``ex``; the parsed verdict or JudgeError."""
    kind = LabelKind(kind)
    return _parse_or_raise(kind, _post(render_prompt(kind, ex), cfg, session))


class RemoteJudge:
    def __init__(self, cfg: RemoteJudgeConfig, kind: LabelKind = LabelKind.BINARY,
                 session: Optional[requests.Session] = None):
        self.cfg = cfg
        self.kind = LabelKind(kind)
        self.session = session if session is not None else requests.Session()

    def judge_pair(self, context: str, response_a: str, response_b: str) -> Judgment:
        raw = _post(render_pair(self.kind, context, response_a, response_b), self.cfg, self.session)
        return _parse_or_raise(self.kind, raw)

    def judge_example(self, ex: PreferenceExample) -> Judgment:
        return remote_judge(ex, self.kind, self.cfg, self.session)

    def judge_many(self, examples: Sequence[PreferenceExample]) -> list[Union[Judgment, JudgeError]]:
        """Judge examples with at most ``max_inflight`` requests open; keeps input order."""
        def one(ex):
            try:
                return self.judge_example(ex)
            except JudgeError as e:
                return e

        with ThreadPoolExecutor(max_workers=max(1, self.cfg.max_inflight)) as pool:
            return list(pool.map(one, examples))


# --------------------------------------------------------------------------
# majority voting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VoteConfig:
    m: int = 1
    tie_break: str = "seeded_random"

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("m", "must be >= 1")
        if self.tie_break != "seeded_random":
            raise ValidationError("tie_break", f"unsupported {self.tie_break!r}")


def _pick(candidates: list, rng: np.random.Generator):
    if len(candidates) == 1:
        return candidates[0]
    return candidates[int(rng.integers(len(candidates)))]


def _top(counts: Counter, pool) -> list:
    best = max(counts[v] for v in pool)
    return sorted(v for v in pool if counts[v] == best)


def majority_vote(judgments: Sequence[Union[Judgment, PreferenceLabel]], cfg: VoteConfig,
                  rng: np.random.Generator) -> PreferenceLabel:
    """Most frequent label on the ballot.

    Ties are broken uniformly with ``rng``. Multiclass ballots without a strict
    value majority first settle the direction, then the most common strength
    within that direction.
    """
    labels = [j.label if isinstance(j, Judgment) else j for j in judgments]
    if not labels:
        raise EmptyBallot("no valid judgments to vote on")
    kind = labels[0].kind
    if any(lab.kind is not kind for lab in labels):
        raise KindMismatch("mixed label kinds on one ballot")

    counts = Counter(lab.value for lab in labels)
    if kind is LabelKind.BINARY:
        return PreferenceLabel.binary(_pick(_top(counts, counts), rng))

    value, n = counts.most_common(1)[0]
    if n * 2 > len(labels):
        return PreferenceLabel.multiclass(value)
    neg = sum(c for v, c in counts.items() if v < 0)
    pos = len(labels) - neg
    if neg == pos:
        sign = _pick([-1, 1], rng)
    else:
        sign = -1 if neg > pos else 1
    pool = [v for v in counts if (v > 0) == (sign > 0)]
    return PreferenceLabel.multiclass(_pick(_top(counts, pool), rng))


def voted_accuracy_binomial(p: float, m: int) -> float:
    """Probability that an m-vote majority of independent p-accurate binary votes is right.

    Even-m ties count half, matching a fair coin tie-break.
    """
    total = 0.0
    for k in range(m + 1):
        pk = math.comb(m, k) * p ** k * (1 - p) ** (m - k)
        if 2 * k > m:
            total += pk
        elif 2 * k == m:
            total += 0.5 * pk
    return total


@dataclass
class JudgeEvaluation:
    n: int
    correct: int
    parse_errors: int
    transport_errors: int
    abstained: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.n if self.n else 0.0

    def summary(self) -> str:
        return (f"n={self.n} accuracy={self.accuracy:.4f} parse_errors={self.parse_errors} "
                f"transport_errors={self.transport_errors} abstained={self.abstained}")


def evaluate_judge(examples: Sequence[PreferenceExample],
                   judge_fn: Callable[[PreferenceExample], Judgment],
                   vote: VoteConfig, rng: np.random.Generator) -> JudgeEvaluation:
    """Accuracy of ``judge_fn`` (sampled ``vote.m`` times per example) against gold labels.

    Failed judgments are dropped from the ballot; an example with an empty
    ballot counts as wrong.
    """
    ev = JudgeEvaluation(len(examples), 0, 0, 0, 0)
    for ex in examples:
        ballot = []
        for _ in range(vote.m):
            try:
                ballot.append(judge_fn(ex))
            except JudgeError as e:
                if e.kind == JudgeError.PARSE:
                    ev.parse_errors += 1
                else:
                    ev.transport_errors += 1
        if not ballot:
            ev.abstained += 1
            continue
        if majority_vote(ballot, vote, rng) == ex.gold_label:
            ev.correct += 1
    return ev
