"""Summaries of training runs: a CSV table plus learning-curve figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import read_metrics  # noqa: E402

SUMMARY_COLUMNS = ("run", "mode", "steps", "initial_true_reward", "final_true_reward",
                   "improvement", "mean_clip_frac", "final_kl", "judge_errors")


def summarize_run(run_dir) -> dict:
    run_dir = Path(run_dir)
    rows = read_metrics(run_dir / "metrics.csv")
    meta = {}
    if (run_dir / "summary.json").exists():
        meta = json.loads((run_dir / "summary.json").read_text(encoding="utf-8"))
    initial = rows[0]["mean_true_reward"] if rows else float("nan")
    final = meta.get("final_true_reward", rows[-1]["mean_true_reward"] if rows else float("nan"))
    return {
        "run": run_dir.name,
        "mode": meta.get("mode", ""),
        "steps": len(rows),
        "initial_true_reward": initial,
        "final_true_reward": final,
        "improvement": final - initial,
        "mean_clip_frac": sum(r["clip_frac"] for r in rows) / len(rows) if rows else 0.0,
        "final_kl": rows[-1]["kl"] if rows else 0.0,
        "judge_errors": sum(r["judge_errors"] for r in rows),
    }


def write_summary(path, summaries: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for s in summaries:
            w.writerow(s)


def init_figure(ncols=2, axsize=(4.5, 3.2)):
    fig, axes = plt.subplots(1, ncols, figsize=(axsize[0] * ncols, axsize[1]))
    return fig, axes


def plot_runs(run_dirs: Sequence, figpath, title: str = "Training curves") -> None:
    """Expected true reward and KL-to-reference against step, one line per run."""
    fig, (ax_r, ax_kl) = init_figure()
    for d in run_dirs:
        rows = read_metrics(Path(d) / "metrics.csv")
        steps = [r["step"] for r in rows]
        ax_r.plot(steps, [r["mean_true_reward"] for r in rows], label=Path(d).name, lw=1.2)
        ax_kl.plot(steps, [r["kl"] for r in rows], lw=1.2)
    ax_r.set_xlabel("step")
    ax_r.set_ylabel("expected true reward")
    ax_r.set_ylim(0, 1.02)
    ax_r.legend(fontsize=8, frameon=False)
    ax_kl.set_xlabel("step")
    ax_kl.set_ylabel("KL(policy || ref)")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(figpath, dpi=120)
    plt.close(fig)


def build_report(run_dirs: Sequence, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, fig_path = out_dir / "report.csv", out_dir / "report.png"
    write_summary(csv_path, [summarize_run(d) for d in run_dirs])
    plot_runs(run_dirs, fig_path)
    return csv_path, fig_path
