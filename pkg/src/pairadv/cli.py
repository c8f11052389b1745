"""Command-line entry point: ``pairadv <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import gradcheck
from .advantage import AdvConfig, build_preference_matrix, equivalence_oracle, pairwise_advantage
from .config import RunConfig
from .curation import build_warmup_dataset
from .io import (
    load_dataset,
    load_groups,
    load_trajectories,
    save_dataset,
    save_matrices,
    save_warmup,
    write_metrics,
)
from .judge import (
    RemoteJudge,
    RemoteJudgeConfig,
    SimulatedJudge,
    evaluate_judge,
    p_correct,
    sim_judge,
    voted_accuracy_binomial,
)
from .model import LabelKind, PairAdvError, PreferenceExample, all_labels
from .report import build_report
from .trainer import AdvMode, SyntheticTask, substream, train_rlhf

log = logging.getLogger("pairadv")

ORACLE_TOL = 1e-9
GRAD_TOL = 1e-4


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_cfg(args, overrides: dict) -> RunConfig:
    cfg = cfgmod.load_config(args.config) if args.config else RunConfig()
    overrides = dict(overrides)
    overrides["seed"] = args.seed
    inputs = overrides.pop("inputs", {})
    given = {k: v for k, v in inputs.items() if v is not None}
    if given:
        overrides["inputs"] = {**cfg.inputs, **given}
    return cfgmod.override(cfg, overrides)


def _input(cfg: RunConfig, name: str) -> str:
    """Input path from the command line or, failing that, from the config's ``inputs``."""
    value = cfg.inputs.get(name)
    if not value:
        raise PairAdvError(f"missing input: pass --{name} or set inputs.{name} in the config")
    return value


def _write_resolved(out: Path, cfg: RunConfig) -> None:
    (out / "config.resolved.json").write_text(cfgmod.dumps(cfg), encoding="utf-8")


def _remote_cfg(cfg: RunConfig) -> RemoteJudgeConfig:
    # credentials come from the environment, never from the written config
    env = RemoteJudgeConfig.from_env()
    url = cfg.judge.remote.url or env.url
    return RemoteJudgeConfig(**{**cfgmod.to_dict(cfg)["judge"]["remote"], "url": url,
                                "token": env.token})


# --------------------------------------------------------------------------

def cmd_curate(args) -> int:
    cfg = _load_cfg(args, {
        "curation.strategy": args.strategy,
        "curation.min_trajectories": args.min_trajectories,
        "inputs": {"examples": args.examples, "trajectories": args.trajectories},
    })
    out = _out(args)
    examples = load_dataset(_input(cfg, "examples"), cfg.strict)
    trajs = load_trajectories(_input(cfg, "trajectories"), cfg.strict)
    kept, report = build_warmup_dataset(examples, trajs, cfg.curation)
    save_warmup(out / "warmup.jsonl", kept)
    (out / "curation_report.json").write_text(json.dumps({
        "kept": report.kept, "discarded": report.discarded,
        "discard_rate": report.discard_rate, "discarded_ids": report.discarded_ids,
        "warnings": report.warnings}, indent=2) + "\n", encoding="utf-8")
    _write_resolved(out, cfg)
    for w in report.warnings:
        log.warning(w)
    print(report.summary())
    return 0


def synthetic_dataset(n: int, kind: LabelKind, rng: np.random.Generator) -> list[PreferenceExample]:
    labels = all_labels(kind)
    picks = rng.integers(len(labels), size=n)
    return [PreferenceExample(f"ex-{i:05d}", f"prompt {i}", f"response a {i}", f"response b {i}",
                              labels[k]) for i, k in enumerate(picks)]


def cmd_judge(args) -> int:
    cfg = _load_cfg(args, {
        "judge.backend": args.backend, "judge.kind": args.kind,
        "judge.sim.p_max": args.p_max, "judge.sim.kappa": args.kappa, "vote.m": args.vote,
        "inputs": {"data": args.data, "synthetic": args.synthetic, "gap": args.gap},
    })
    out = _out(args)
    kind = cfg.judge.kind
    if cfg.inputs.get("data"):
        examples = load_dataset(cfg.inputs["data"], cfg.strict)
    elif cfg.inputs.get("synthetic"):
        examples = synthetic_dataset(int(cfg.inputs["synthetic"]), kind, substream(cfg.seed, "data"))
    else:
        raise PairAdvError("judge needs --data or --synthetic")
    save_dataset(out / "dataset.jsonl", examples)

    gap = float(cfg.inputs["gap"]) if cfg.inputs.get("gap") is not None else 1.0
    if cfg.judge.backend == "sim":
        judge_rng = substream(cfg.seed, "judge")
        judge_fn = lambda ex: sim_judge(ex, gap, cfg.judge.sim, judge_rng, kind)  # noqa: E731
    else:
        judge_fn = RemoteJudge(_remote_cfg(cfg), kind).judge_example
    ev = evaluate_judge(examples, judge_fn, cfg.vote, substream(cfg.seed, "tiebreak"))
    result = {"n": ev.n, "accuracy": ev.accuracy, "correct": ev.correct,
              "parse_errors": ev.parse_errors, "transport_errors": ev.transport_errors,
              "abstained": ev.abstained, "m": cfg.vote.m}
    line = ev.summary()
    if cfg.judge.backend == "sim" and kind is LabelKind.BINARY:
        p = p_correct(gap, cfg.judge.sim)
        pred = voted_accuracy_binomial(p, cfg.vote.m)
        sigma = math.sqrt(pred * (1 - pred) / max(ev.n, 1))
        result.update(predicted=pred, sigma=sigma, z=(ev.accuracy - pred) / sigma if sigma else 0.0)
        line += f" predicted={pred:.4f} sigma={sigma:.4f}"
    (out / "judge_eval.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    _write_resolved(out, cfg)
    print(line)
    return 0


def cmd_matrix(args) -> int:
    cfg = _load_cfg(args, {
        "judge.backend": args.backend, "judge.kind": args.kind,
        "judge.sim.p_max": args.p_max, "judge.sim.kappa": args.kappa,
        "train.randomize_roles": True if args.randomize_roles else None,
        "inputs": {"groups": args.groups},
    })
    out = _out(args)
    groups = load_groups(_input(cfg, "groups"), cfg.strict)
    judge_rng = substream(cfg.seed, "judge")
    role_rng = substream(cfg.seed, "roles")
    matrices, rows = [], []
    for grp in groups:
        if cfg.judge.backend == "sim":
            if grp["rewards"] is None:
                raise PairAdvError(f"group {grp['group_id']}: simulated judge needs 'rewards'")
            table = dict(zip(grp["responses"], map(float, grp["rewards"])))
            judge = SimulatedJudge(table.__getitem__, cfg.judge.sim, cfg.judge.kind, judge_rng)
            inflight = 1
        else:
            rcfg = _remote_cfg(cfg)
            judge = RemoteJudge(rcfg, cfg.judge.kind)
            inflight = rcfg.max_inflight
        mat = build_preference_matrix(grp["responses"], judge, grp["context"], grp["group_id"],
                                      max_retries=cfg.train.max_retries,
                                      randomize_roles=cfg.train.randomize_roles, rng=role_rng,
                                      max_inflight=inflight)
        matrices.append(mat)
        for i, a in enumerate(pairwise_advantage(mat, cfg.adv)):
            rows.append((grp["group_id"], i, repr(float(a))))
        if mat.failed_pairs:
            log.warning("group %s: %d failed pairs", grp["group_id"], len(mat.failed_pairs))
    save_matrices(out / "matrices.jsonl", matrices)
    with open(out / "advantages.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("group_id", "index", "advantage"))
        w.writerows(rows)
    _write_resolved(out, cfg)
    print(f"groups={len(matrices)} failed_pairs={sum(len(m.failed_pairs) for m in matrices)}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args, {
        "adv_mode": args.adv, "train.steps": args.steps, "train.lr": args.lr,
        "train.group_size": args.group_size, "train.rollout_batch": args.rollout_batch,
        "judge.backend": args.backend, "judge.kind": args.kind,
        "judge.sim.p_max": args.p_max, "judge.sim.kappa": args.kappa,
    })
    out = _out(args)
    tcfg = cfg.resolved_train()
    task = SyntheticTask.random(cfg.task.vocab_size, cfg.task.seq_len, substream(cfg.seed, "task"))
    mode = AdvMode(cfg.adv_mode)
    judge = None
    if mode is AdvMode.PAIRWISE:
        if cfg.judge.backend == "sim":
            judge = SimulatedJudge(task.reward_of_text, cfg.judge.sim, cfg.judge.kind,
                                   substream(cfg.seed, "judge"))
        else:
            judge = RemoteJudge(_remote_cfg(cfg), cfg.judge.kind)
    result = train_rlhf(task, judge, tcfg, mode)
    write_metrics(out / "metrics.csv", result.metrics)
    (out / "policy.json").write_text(json.dumps({"logits": result.policy.logits.tolist()}) + "\n",
                                     encoding="utf-8")
    summary = {"mode": mode.value, "steps": tcfg.steps, "target": list(task.target),
               "initial_true_reward": result.initial_true_reward,
               "final_true_reward": result.final_true_reward,
               "judge_errors": sum(m.judge_errors for m in result.metrics)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    _write_resolved(out, cfg)
    print(f"mode={mode.value} initial={result.initial_true_reward:.4f} "
          f"final={result.final_true_reward:.4f}")
    return 0


def cmd_oracle(args) -> int:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for g in args.g:
        for eps in args.eps:
            res = equivalence_oracle(rng.normal(size=(args.groups, g)), AdvConfig(eps))
            worst = max(worst, res.max_abs_diff)
    grads = gradcheck.run_all(args.grad_instances, rng)
    print(f"max_abs_diff={worst:.3e} tol={ORACLE_TOL:.0e}")
    for name, err in grads.items():
        print(f"grad_{name}_max_rel_err={err:.3e} tol={GRAD_TOL:.0e}")
    ok = worst <= ORACLE_TOL and all(e <= GRAD_TOL for e in grads.values())
    return 0 if ok else 1


def cmd_report(args) -> int:
    out = _out(args)
    csv_path, fig_path = build_report(args.runs, out)
    print(f"report={csv_path} figure={fig_path}")
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", default="runs/latest", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    judge_opts = argparse.ArgumentParser(add_help=False)
    judge_opts.add_argument("--backend", choices=("sim", "remote"))
    judge_opts.add_argument("--kind", choices=("binary", "multiclass"))
    judge_opts.add_argument("--p-max", type=float)
    judge_opts.add_argument("--kappa", type=float)

    parser = argparse.ArgumentParser(prog="pairadv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curate", parents=[common], help="build a warm-up SFT dataset")
    p.add_argument("--examples", help="preference examples JSONL")
    p.add_argument("--trajectories", help="sampled judge trajectories JSONL")
    p.add_argument("--strategy", choices=("longest", "shortest"))
    p.add_argument("--min-trajectories", type=int)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("judge", parents=[common, judge_opts], help="evaluate a judge")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data")
    src.add_argument("--synthetic", type=int, help="generate N synthetic examples")
    p.add_argument("--vote", type=int, help="judgments per example (majority vote)")
    p.add_argument("--gap", type=float, help="true reward gap seen by the simulated judge")
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("matrix", parents=[common, judge_opts], help="dump preference matrices")
    p.add_argument("--groups", help="JSONL of response groups")
    p.add_argument("--randomize-roles", action="store_true")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("train", parents=[common, judge_opts], help="toy RLHF run")
    p.add_argument("--adv", choices=("pointwise", "pairwise"))
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--group-size", type=int)
    p.add_argument("--rollout-batch", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("oracle", parents=[common], help="equivalence and gradient oracles")
    p.add_argument("--groups", type=int, default=1000)
    p.add_argument("--g", type=int, nargs="+", default=[2, 3, 4, 8, 16])
    p.add_argument("--eps", type=float, nargs="+", default=[0.0, 1e-6])
    p.add_argument("--grad-instances", type=int, default=20)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", parents=[common], help="summarize runs to CSV and a figure")
    p.add_argument("--runs", nargs="+", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is None and args.command == "oracle":
        args.seed = 0
    try:
        return args.func(args)
    except (PairAdvError, OSError) as e:
        print(f"error: type={type(e).__name__} message={json.dumps(str(e))}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
