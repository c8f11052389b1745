"""Central finite-difference checks for the analytic policy gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .trainer import SeqPolicy, kl_exact, kl_grad, sft_grad, sft_loss, surrogate_and_grad


def numeric_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + h
        up = f(x)
        x[idx] = orig - h
        down = f(x)
        x[idx] = orig
        g[idx] = (up - down) / (2 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)
    return float(np.linalg.norm(a - b) / scale)


def _random_policy(rng, v, l, scale=1.0):
    return SeqPolicy(rng.normal(0.0, scale, size=(l, v)))


def check_sft(rng: np.random.Generator, v: int, l: int) -> float:
    p = _random_policy(rng, v, l)
    tokens = rng.integers(v, size=int(rng.integers(1, l + 1)))
    f = lambda z: sft_loss(SeqPolicy(z), tokens).total  # noqa: E731
    return rel_err(sft_grad(p, tokens), numeric_grad(f, p.logits))


def check_kl(rng: np.random.Generator, v: int, l: int) -> float:
    p, ref = _random_policy(rng, v, l), _random_policy(rng, v, l)
    f = lambda z: kl_exact(SeqPolicy(z), ref)  # noqa: E731
    return rel_err(kl_grad(p, ref), numeric_grad(f, p.logits))


def check_surrogate(rng: np.random.Generator, v: int, l: int, g: int = 4,
                    clip_eps: float = 0.2, kl_beta: float = 0.1, h: float = 1e-5) -> float:
    """Gradient of the full clipped objective with KL, at a point away from clip kinks."""
    old = _random_policy(rng, v, l)
    ref = _random_policy(rng, v, l)
    seqs = old.sample(g, rng)
    adv = rng.normal(size=g)
    while True:
        new = SeqPolicy(old.logits + rng.normal(0.0, 0.15, size=old.logits.shape))
        ratio = np.exp(new.logprob_many(seqs) - old.logprob_many(seqs))
        # the objective is not differentiable where ratio sits on a clip boundary
        if np.all(np.abs(np.abs(ratio - 1.0) - clip_eps) > 1e-3):
            break
    f = lambda z: surrogate_and_grad(SeqPolicy(z), old, ref, seqs, adv,  # noqa: E731
                                     clip_eps, kl_beta).value
    analytic = surrogate_and_grad(new, old, ref, seqs, adv, clip_eps, kl_beta).grad
    return rel_err(analytic, numeric_grad(f, new.logits, h))


def run_all(n: int, rng: np.random.Generator) -> dict[str, float]:
    """Worst relative error of each gradient over ``n`` random tiny instances."""
    worst = {"sft": 0.0, "kl": 0.0, "surrogate": 0.0}
    for _ in range(n):
        v, l = int(rng.integers(2, 6)), int(rng.integers(1, 4))
        worst["sft"] = max(worst["sft"], check_sft(rng, v, l))
        worst["kl"] = max(worst["kl"], check_kl(rng, v, l))
        worst["surrogate"] = max(worst["surrogate"], check_surrogate(rng, v, l))
    return worst
