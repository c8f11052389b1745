"""Tabular softmax sequence policies and the GRPO-style update loop.

Policies are position-factorized: ``pi(y) = prod_t softmax(logits[t])[y_t]``.
Everything here is small enough to differentiate by hand, so every gradient
is analytic and checked against finite differences in the test suite.
"""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from .advantage import AdvConfig, build_preference_matrix, grpo_advantage, pairwise_advantage
from .curation import WarmupExample
from .model import PairAdvError, PreferenceLabel, ValidationError, all_labels
from .rewards import rule_reward


class BadSequence(PairAdvError):
    pass


class ShapeMismatch(PairAdvError):
    pass


class AdvMode(str, enum.Enum):
    POINTWISE = "pointwise"
    PAIRWISE = "pairwise"


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass
class SeqPolicy:
    logits: np.ndarray  # (L, V)

    def __post_init__(self):
        self.logits = np.array(self.logits, dtype=float)
        if self.logits.ndim != 2:
            raise ShapeMismatch(f"logits must be (L, V), got {self.logits.shape}")

    @classmethod
    def uniform(cls, vocab_size: int, seq_len: int) -> "SeqPolicy":
        return cls(np.zeros((seq_len, vocab_size)))

    @property
    def seq_len(self) -> int:
        return self.logits.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.logits.shape[1]

    def log_probs(self) -> np.ndarray:
        return _log_softmax(self.logits)

    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs())

    def copy(self) -> "SeqPolicy":
        return SeqPolicy(self.logits.copy())

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` sequences, shape (n, L), by inverse-CDF per position."""
        cdf = np.cumsum(self.probs(), axis=1)
        u = rng.random((n, self.seq_len))
        out = np.empty((n, self.seq_len), dtype=np.int64)
        for t in range(self.seq_len):
            out[:, t] = np.searchsorted(cdf[t], u[:, t], side="right")
        return np.minimum(out, self.vocab_size - 1)

    def logprob_many(self, seqs: np.ndarray) -> np.ndarray:
        seqs = self._check(seqs)
        lp = self.log_probs()
        return lp[np.arange(seqs.shape[1]), seqs].sum(axis=1)

    def _check(self, seqs) -> np.ndarray:
        seqs = np.atleast_2d(np.asarray(seqs))
        if seqs.size and (seqs.shape[1] > self.seq_len or seqs.min() < 0
                          or seqs.max() >= self.vocab_size):
            raise BadSequence(f"sequence does not fit a policy with L={self.seq_len}, "
                              f"V={self.vocab_size}")
        return seqs.astype(np.int64)


def _same_shape(a: SeqPolicy, b: SeqPolicy) -> None:
    if a.logits.shape != b.logits.shape:
        raise ShapeMismatch(f"{a.logits.shape} vs {b.logits.shape}")


def seq_logprob(p: SeqPolicy, y: Sequence[int]) -> float:
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != p.seq_len:
        raise BadSequence(f"expected a length-{p.seq_len} sequence, got shape {y.shape}")
    return float(p.logprob_many(y[None, :])[0])


def _onehot_counts(seqs: np.ndarray, weights: np.ndarray, shape) -> np.ndarray:
    """sum_i weights[i] * onehot(seqs[i]) as an (L, V) grid."""
    out = np.zeros(shape)
    pos = np.broadcast_to(np.arange(seqs.shape[1]), seqs.shape)
    np.add.at(out, (pos.ravel(), seqs.ravel()), np.repeat(weights, seqs.shape[1]))
    return out


# --------------------------------------------------------------------------
# supervised warm-up loss
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SFTLoss:
    total: float
    reasoning_nll: float
    label_nll: float


def _prefix(p: SeqPolicy, tokens) -> np.ndarray:
    tokens = np.asarray(tokens)
    if tokens.ndim != 1 or len(tokens) == 0 or len(tokens) > p.seq_len:
        raise BadSequence(f"encoded length {len(tokens)} does not fit L={p.seq_len}")
    if tokens.min() < 0 or tokens.max() >= p.vocab_size:
        raise BadSequence("token id out of vocabulary")
    return tokens.astype(np.int64)


def sft_loss(p: SeqPolicy, tokens: Sequence[int]) -> SFTLoss:
    """Negative log-likelihood of reasoning tokens followed by one label token.

    The sequence occupies positions ``0..n-1``; the last token is the label.
    """
    tokens = _prefix(p, tokens)
    n = len(tokens)
    nll = -p.log_probs()[np.arange(n), tokens]
    return SFTLoss(float(nll.sum()), float(nll[:-1].sum()), float(nll[-1]))


def sft_grad(p: SeqPolicy, tokens: Sequence[int]) -> np.ndarray:
    tokens = _prefix(p, tokens)
    n = len(tokens)
    g = np.zeros_like(p.logits)
    g[:n] = p.probs()[:n]
    g[np.arange(n), tokens] -= 1.0
    return g


def encode_warmup(w: WarmupExample, vocab_size: int, seq_len: int) -> list[int]:
    """Map a warm-up trajectory to token ids: hashed reasoning words, then a label token.

    The top ``n_labels`` ids are reserved for labels; reasoning is truncated
    to fit ``seq_len``.
    """
    kind = w.example.gold_label.kind
    labels = all_labels(kind)
    n_text = vocab_size - len(labels)
    if n_text < 1:
        raise BadSequence(f"vocab of {vocab_size} leaves no room for reasoning tokens")
    words = w.chosen.reasoning.split()[: seq_len - 1]
    ids = [zlib.crc32(word.encode("utf-8")) % n_text for word in words]
    return ids + [n_text + labels.index(w.chosen.predicted_label)]


def sft_train(p: SeqPolicy, data: Sequence[Sequence[int]], lr: float, steps: int) -> list[float]:
    """Full-batch gradient descent on the mean SFT loss; returns the loss curve."""
    curve = []
    for _ in range(steps):
        losses = [sft_loss(p, x).total for x in data]
        curve.append(float(np.mean(losses)))
        grad = sum(sft_grad(p, x) for x in data) / len(data)
        p.logits -= lr * grad
    return curve


# --------------------------------------------------------------------------
# KL and the clipped surrogate
# --------------------------------------------------------------------------

def kl_exact(p: SeqPolicy, ref: SeqPolicy) -> float:
    """Sum over positions of KL(p_t || ref_t), computed from the full tables."""
    _same_shape(p, ref)
    lp, lq = p.log_probs(), ref.log_probs()
    return float(np.sum(np.exp(lp) * (lp - lq)))


def kl_grad(p: SeqPolicy, ref: SeqPolicy) -> np.ndarray:
    _same_shape(p, ref)
    lp, lq = p.log_probs(), ref.log_probs()
    pr = np.exp(lp)
    kl_t = np.sum(pr * (lp - lq), axis=1, keepdims=True)
    return pr * (lp - lq - kl_t)


@dataclass(frozen=True)
class TrainConfig:
    group_size: int = 8
    clip_eps: float = 0.2
    kl_beta: float = 1e-4
    adv: AdvConfig = AdvConfig()
    lr: float = 0.5
    steps: int = 200
    seed: int = 0
    rollout_batch: int = 8
    inner_steps: int = 1
    # std of Gaussian noise added to pointwise rewards (a crude stand-in for a learned RM)
    reward_noise: float = 0.0
    max_retries: int = 0
    randomize_roles: bool = False

    def __post_init__(self):
        if isinstance(self.adv, dict):
            object.__setattr__(self, "adv", AdvConfig(**self.adv))
        if not 0 < self.clip_eps < 1:
            raise ValidationError("clip_eps", "must lie in (0, 1)")
        if self.kl_beta < 0:
            raise ValidationError("kl_beta", "must be >= 0")
        if self.group_size < 2:
            raise ValidationError("group_size", "must be >= 2")
        if self.rollout_batch < 1 or self.inner_steps < 1 or self.steps < 0:
            raise ValidationError("rollout_batch", "batch, inner_steps, steps must be positive")


@dataclass(frozen=True)
class Surrogate:
    value: float
    grad: np.ndarray
    clip_frac: float


def surrogate_and_grad(new: SeqPolicy, old: SeqPolicy, ref: SeqPolicy, seqs: np.ndarray,
                       advantages: np.ndarray, clip_eps: float, kl_beta: float) -> Surrogate:
    """Clipped objective (to maximize) and its gradient w.r.t. ``new.logits``."""
    _same_shape(new, old)
    _same_shape(new, ref)
    seqs = new._check(seqs)
    adv = np.asarray(advantages, dtype=float)
    if len(adv) != len(seqs):
        raise ShapeMismatch(f"{len(seqs)} sequences but {len(adv)} advantages")
    if seqs.shape[1] != new.seq_len:
        raise BadSequence("rollouts must have full length")
    n = len(seqs)
    ratio = np.exp(new.logprob_many(seqs) - old.logprob_many(seqs))
    clipped = np.clip(ratio, 1 - clip_eps, 1 + clip_eps)
    unclipped_term, clipped_term = ratio * adv, clipped * adv
    per_sample = np.minimum(unclipped_term, clipped_term)
    value = per_sample.mean() - kl_beta * kl_exact(new, ref)

    # gradient flows only through samples whose unclipped term is the minimum
    w = np.where(unclipped_term <= clipped_term, unclipped_term, 0.0) / n
    grad = _onehot_counts(seqs, w, new.logits.shape) - w.sum() * new.probs()
    if kl_beta:
        grad = grad - kl_beta * kl_grad(new, ref)
    clip_frac = float(np.mean(np.abs(ratio - 1.0) > clip_eps)) if n else 0.0
    return Surrogate(float(value), grad, clip_frac)


def clipped_surrogate(new: SeqPolicy, old: SeqPolicy, samples, cfg: TrainConfig,
                      ref: Optional[SeqPolicy] = None) -> float:
    """Group mean of min(ratio * A, clip(ratio) * A) minus ``kl_beta * KL(new || ref)``.

    ``samples`` is a list of ``(sequence, advantage)`` pairs; ``ref`` defaults to ``old``.
    """
    seqs = np.array([s for s, _ in samples])
    adv = np.array([a for _, a in samples], dtype=float)
    return surrogate_and_grad(new, old, ref if ref is not None else old, seqs, adv,
                              cfg.clip_eps, cfg.kl_beta).value


# --------------------------------------------------------------------------
# tasks
# --------------------------------------------------------------------------

class Task(Protocol):
    vocab_size: int
    seq_len: int

    def rewards(self, seqs: np.ndarray) -> np.ndarray: ...

    def expected_reward(self, policy: SeqPolicy) -> float: ...


def render_tokens(seq: Sequence[int]) -> str:
    return " ".join(f"t{int(t)}" for t in seq)


def parse_tokens(text: str) -> list[int]:
    return [int(tok[1:]) for tok in text.split()]


@dataclass(frozen=True)
class SyntheticTask:
    """Hidden target sequence; reward is the weighted fraction of matching positions."""

    target: tuple[int, ...]
    weights: tuple[float, ...]
    vocab_size: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.target) or np.any(w < 0) or w.sum() <= 0:
            raise ValidationError("weights", "need one non-negative weight per position")
        object.__setattr__(self, "weights", tuple(float(x) for x in w / w.sum()))
        object.__setattr__(self, "target", tuple(int(t) for t in self.target))

    @classmethod
    def random(cls, vocab_size: int, seq_len: int, rng: np.random.Generator) -> "SyntheticTask":
        target = rng.integers(vocab_size, size=seq_len)
        weights = rng.uniform(0.5, 1.5, size=seq_len)
        return cls(tuple(target), tuple(weights), vocab_size)

    @property
    def seq_len(self) -> int:
        return len(self.target)

    def rewards(self, seqs: np.ndarray) -> np.ndarray:
        return (np.asarray(seqs) == np.asarray(self.target)) @ np.asarray(self.weights)

    def true_reward(self, seq: Sequence[int]) -> float:
        return float(self.rewards(np.asarray(seq)[None, :])[0])

    def reward_of_text(self, text: str) -> float:
        return self.true_reward(parse_tokens(text))

    def expected_reward(self, policy: SeqPolicy) -> float:
        p = policy.probs()
        return float(np.dot(self.weights, p[np.arange(self.seq_len), list(self.target)]))


@dataclass(frozen=True)
class JudgeRLTask:
    """Toy judge: the final token is its verdict, earlier tokens are its reasoning.

    Token ``k`` at the last position decodes to the k-th label of the kind;
    anything beyond the label range is an unparseable answer (reward 0).
    """

    gold: PreferenceLabel
    vocab_size: int
    seq_len: int

    def __post_init__(self):
        if self.vocab_size < len(all_labels(self.gold.kind)):
            raise ValidationError("vocab_size", "too small to hold every label")

    def decode(self, token: int) -> Optional[PreferenceLabel]:
        labels = all_labels(self.gold.kind)
        return labels[token] if token < len(labels) else None

    def _reward_table(self) -> np.ndarray:
        return np.array([rule_reward(self.decode(k), self.gold) for k in range(self.vocab_size)])

    def rewards(self, seqs: np.ndarray) -> np.ndarray:
        return self._reward_table()[np.asarray(seqs)[:, -1]]

    def expected_reward(self, policy: SeqPolicy) -> float:
        return float(policy.probs()[-1] @ self._reward_table())


# --------------------------------------------------------------------------
# training loop
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StepMetrics:
    step: int
    mean_true_reward: float  # exact expectation under the pre-update policy
    mean_reward: float  # sample mean over this step's rollouts
    mean_abs_adv: float
    clip_frac: float
    kl: float
    judge_errors: int


@dataclass
class RunResult:
    metrics: list[StepMetrics]
    policy: SeqPolicy
    final_true_reward: float
    mode: AdvMode = AdvMode.POINTWISE
    extra: dict = field(default_factory=dict)

    @property
    def initial_true_reward(self) -> float:
        return self.metrics[0].mean_true_reward if self.metrics else self.final_true_reward


def group_advantages(seqs: np.ndarray, task: Task, cfg: TrainConfig, mode: AdvMode,
                     judge=None, rng: Optional[np.random.Generator] = None):
    """Advantages for ``B * G`` rollouts laid out group-major.

    Returns (advantages, rewards used or observed, judge error count).
    """
    g = cfg.group_size
    true = task.rewards(seqs)
    adv = np.empty(len(seqs))
    errors = 0
    if mode is AdvMode.POINTWISE:
        rewards = true
        if cfg.reward_noise > 0:
            rewards = rewards + rng.normal(0.0, cfg.reward_noise, size=len(rewards))
        adv = grpo_advantage(rewards.reshape(-1, g), cfg.adv).ravel()
        return adv, rewards, errors
    if judge is None:
        raise ValueError("pairwise mode needs a judge")
    for b in range(0, len(seqs), g):
        texts = [render_tokens(s) for s in seqs[b:b + g]]
        mat = build_preference_matrix(texts, judge, group_id=str(b // g),
                                      max_retries=cfg.max_retries,
                                      randomize_roles=cfg.randomize_roles, rng=rng)
        errors += len(mat.failed_pairs)
        adv[b:b + g] = pairwise_advantage(mat, cfg.adv)
    return adv, true, errors


def grpo_step(policy: SeqPolicy, ref: SeqPolicy, task: Task, cfg: TrainConfig,
              mode: AdvMode, rng: np.random.Generator, judge=None,
              step: int = 0) -> tuple[SeqPolicy, StepMetrics]:
    """Sample ``rollout_batch`` groups of ``group_size``, score them, ascend the surrogate."""
    mode = AdvMode(mode)
    old = policy.copy()
    seqs = old.sample(cfg.rollout_batch * cfg.group_size, rng)
    adv, rewards, errors = group_advantages(seqs, task, cfg, mode, judge, rng)

    expected = task.expected_reward(old)
    kl = kl_exact(old, ref)
    new = old.copy()
    clip_frac = 0.0
    for _ in range(cfg.inner_steps):
        s = surrogate_and_grad(new, old, ref, seqs, adv, cfg.clip_eps, cfg.kl_beta)
        new.logits += cfg.lr * s.grad
        clip_frac = s.clip_frac
    metrics = StepMetrics(step, expected, float(np.mean(rewards)), float(np.mean(np.abs(adv))),
                          clip_frac, kl, errors)
    return new, metrics


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named purpose under one master seed."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode("utf-8"))])


def train_rlhf(task: Task, judge, cfg: TrainConfig, mode: AdvMode,
               policy: Optional[SeqPolicy] = None) -> RunResult:
    """Run ``cfg.steps`` GRPO steps from ``policy`` (uniform by default)."""
    mode = AdvMode(mode)
    policy = policy.copy() if policy is not None else SeqPolicy.uniform(task.vocab_size, task.seq_len)
    ref = policy.copy()
    rng = substream(cfg.seed, "rollout")
    metrics = []
    for step in range(cfg.steps):
        policy, m = grpo_step(policy, ref, task, cfg, mode, rng, judge=judge, step=step)
        metrics.append(m)
    return RunResult(metrics, policy, task.expected_reward(policy), mode)


def train_judge_rl(task: JudgeRLTask, cfg: TrainConfig,
                   policy: Optional[SeqPolicy] = None) -> RunResult:
    """Rule-based RL of a toy judge: accuracy reward on its final verdict token."""
    return train_rlhf(task, None, cfg, AdvMode.POINTWISE, policy)
