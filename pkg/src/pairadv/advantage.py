"""Group-relative advantages from scalar rewards or from pairwise preference strengths."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .judge import JudgeError
from .model import Judgment, LabelKind, PairAdvError, ValidationError, label_sign

log = logging.getLogger(__name__)

SKEW_TOL = 1e-12


class GroupTooSmall(PairAdvError):
    pass


class BrokenSkewSymmetry(PairAdvError):
    pass


@dataclass(frozen=True)
class AdvConfig:
    eps: float = 1e-6

    def __post_init__(self):
        if self.eps < 0:
            raise ValidationError("eps", "must be >= 0")


def grpo_advantage(rewards, cfg: AdvConfig = AdvConfig()) -> np.ndarray:
    """(r_i - mean) / (sample std + eps), with the Bessel-corrected std.

    Accepts one group of shape (G,) or a batch of groups of shape (..., G).
    """
    r = np.asarray(rewards, dtype=float)
    if r.ndim < 1 or r.shape[-1] < 2:
        raise GroupTooSmall(f"need at least 2 rewards per group, got shape {r.shape}")
    g = r.shape[-1]
    # the float mean of a constant group can be off by an ulp, so test constancy exactly
    constant = np.all(r == r[..., :1], axis=-1, keepdims=True)
    centered = r - r.mean(axis=-1, keepdims=True)
    denom = np.sqrt(np.sum(centered ** 2, axis=-1, keepdims=True) / (g - 1)) + cfg.eps
    ok = ~constant & (denom > 0)
    return np.divide(centered, denom, out=np.zeros_like(r), where=ok)


def _check_skew(d: np.ndarray, tol: float) -> None:
    """Raise unless every trailing (G, G) block is skew-symmetric up to ``tol * scale``."""
    if d.ndim < 2 or d.shape[-1] != d.shape[-2]:
        raise BrokenSkewSymmetry(f"matrix must be square, got shape {d.shape}")
    if d.size == 0:
        return
    scale = np.abs(d).max(axis=(-2, -1))
    if not np.all(np.isfinite(scale)):
        raise BrokenSkewSymmetry("non-finite entries")
    limit = tol * np.maximum(1.0, scale)
    # d + d^T carries twice the diagonal, so one pass covers both conditions
    asym = np.abs(d + np.swapaxes(d, -1, -2))
    bad = asym.max(axis=(-2, -1)) > limit
    if np.any(bad):
        if np.any(0.5 * np.diagonal(asym, axis1=-2, axis2=-1).max(axis=-1) > limit):
            raise BrokenSkewSymmetry("non-zero diagonal")
        raise BrokenSkewSymmetry("entries[i][j] != -entries[j][i]")


@dataclass
class PreferenceMatrix:
    """Skew-symmetric preference strengths for one group of responses.

    ``entries[i, j] > 0`` means response i is judged better than response j.
    """

    entries: np.ndarray
    group_id: str = ""
    failed_pairs: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_rewards(cls, rewards: Sequence[float], group_id: str = "") -> "PreferenceMatrix":
        r = np.asarray(rewards, dtype=float)
        return cls(r[:, None] - r[None, :], group_id)

    def check(self, tol: float = SKEW_TOL) -> None:
        if self.entries.ndim != 2:
            raise BrokenSkewSymmetry(f"matrix must be square, got shape {self.entries.shape}")
        _check_skew(self.entries, tol)

    def to_json(self) -> str:
        return json.dumps({"group_id": self.group_id, "G": self.size,
                           "entries": [float(x) for x in self.entries.ravel()]})

    @classmethod
    def from_json(cls, text: str) -> "PreferenceMatrix":
        obj = json.loads(text)
        g = int(obj["G"])
        return cls(np.asarray(obj["entries"], dtype=float).reshape(g, g), obj["group_id"])


def entry_from_judgment(judgment: Judgment) -> float:
    """Strength of "A beats B" implied by one judgment.

    Multiclass verdicts are used as-is (negated, since negative favours A).
    Binary verdicts are scaled by the inverse reasoning length, so long,
    hesitant reasoning yields a weaker preference.
    """
    label = judgment.label
    if label.kind is LabelKind.MULTICLASS:
        return float(-label.value)
    # a zero-length trace would divide by zero; treat it as one token
    return -label_sign(label) / max(judgment.reasoning_len, 1)


def build_preference_matrix(
    responses: Sequence[str],
    judge,
    context: str = "",
    group_id: str = "",
    max_retries: int = 0,
    randomize_roles: bool = False,
    rng: Optional[np.random.Generator] = None,
    max_inflight: int = 1,
) -> PreferenceMatrix:
    """Judge every within-group pair once and assemble the skew-symmetric matrix.

    ``judge`` is any object with ``judge_pair(context, response_a, response_b)``.
    By default the lower index plays response A. Pairs whose judge calls keep
    failing after ``max_retries`` retries contribute 0 and are listed in
    ``failed_pairs``. Use ``max_inflight > 1`` only with thread-safe judges.
    """
    g = len(responses)
    if g < 2:
        raise GroupTooSmall(f"need at least 2 responses, got {g}")
    pairs = [(i, j) for i in range(g) for j in range(i + 1, g)]
    if randomize_roles:
        if rng is None:
            raise ValueError("randomize_roles needs an rng")
        swaps = rng.random(len(pairs)) < 0.5
    else:
        swaps = np.zeros(len(pairs), dtype=bool)

    def run(task):
        (i, j), swap = task
        a, b = (j, i) if swap else (i, j)
        last = None
        for _ in range(max_retries + 1):
            try:
                return entry_from_judgment(judge.judge_pair(context, responses[a], responses[b])), None
            except JudgeError as e:
                last = e
        return None, last

    tasks = list(zip(pairs, swaps))
    if max_inflight > 1:
        with ThreadPoolExecutor(max_workers=max_inflight) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    d = np.zeros((g, g))
    failed = []
    for ((i, j), swap), (value, err) in zip(tasks, results):
        if value is None:
            log.warning("group %s pair (%d, %d) failed: %s", group_id, i, j, err)
            failed.append((i, j))
            value = 0.0
        elif swap:
            value = -value  # judged as d_ji
        d[i, j] = value
        d[j, i] = -value
    mat = PreferenceMatrix(d, group_id, failed)
    mat.check()
    return mat


def pairwise_advantage(matrix, cfg: AdvConfig = AdvConfig()) -> np.ndarray:
    """Advantages straight from a preference matrix.

    Row sums divided by sqrt(G / (2(G-1)) * sum d_ij^2) + G * eps. When the
    entries are reward differences this equals ``grpo_advantage`` exactly.
    A plain array of shape (..., G, G) is treated as a batch of groups.
    """
    d = matrix.entries if isinstance(matrix, PreferenceMatrix) else np.asarray(matrix, dtype=float)
    if d.ndim < 2 or d.shape[-1] < 2:
        raise GroupTooSmall(f"need at least a 2x2 matrix, got shape {d.shape}")
    _check_skew(d, SKEW_TOL)
    g = d.shape[-1]
    rows = d.sum(axis=-1)
    denom = np.sqrt(g / (2.0 * (g - 1)) * np.sum(d ** 2, axis=(-2, -1)))[..., None] + g * cfg.eps
    return np.divide(rows, denom, out=np.zeros_like(rows), where=denom > 0)


@dataclass(frozen=True)
class OracleResult:
    pointwise: np.ndarray
    pairwise: np.ndarray
    max_abs_diff: float


def equivalence_oracle(rewards, cfg: AdvConfig = AdvConfig()) -> OracleResult:
    """Compute both estimators on the same group(s), with d_ij := r_i - r_j.

    ``rewards`` may be one group (G,) or a batch (N, G).
    """
    r = np.asarray(rewards, dtype=float)
    a = grpo_advantage(r, cfg)
    b = pairwise_advantage(r[..., :, None] - r[..., None, :], cfg)
    return OracleResult(a, b, float(np.max(np.abs(a - b))))
