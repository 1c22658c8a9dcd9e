"""Read run logs, write tab-delimited tables and render figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..core import read_jsonl

CURVE_METRICS = ("tasks_above_60", "mean_s_hat", "high_success_fraction", "eval_success")


def load_run(run_dir: str | Path) -> dict:
    run_dir = Path(run_dir)
    with open(run_dir / "metrics.jsonl") as fh:
        rounds = list(read_jsonl(fh))
    summary = {}
    if (run_dir / "summary.json").exists():
        summary = json.loads((run_dir / "summary.json").read_text())
    config = {}
    if (run_dir / "config.json").exists():
        config = json.loads((run_dir / "config.json").read_text())
    return {"dir": str(run_dir), "rounds": rounds, "summary": summary, "config": config}


def write_tsv(path: str | Path, rows: Sequence[Mapping], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), delimiter="\t", extrasaction="ignore",
                           lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})


def curve_rows(runs_by_label: Mapping[str, Sequence[dict]]) -> list[dict]:
    """Per label and round: the seed-mean of every curve metric."""
    rows = []
    for label, runs in runs_by_label.items():
        n_rounds = min(len(r["rounds"]) for r in runs)
        for i in range(n_rounds):
            row = {"label": label, "round": i, "seeds": len(runs)}
            for m in CURVE_METRICS:
                vals = [r["rounds"][i].get(m) for r in runs]
                vals = [v for v in vals if v is not None]
                row[m] = float(np.mean(vals)) if vals else None
            rows.append(row)
    return rows


def summary_rows(runs_by_label: Mapping[str, Sequence[dict]]) -> list[dict]:
    rows = []
    for label, runs in runs_by_label.items():
        for r in runs:
            s = r["summary"]
            rows.append({
                "label": label,
                "seed": s.get("seed"),
                "final_tasks_above_60": s.get("final_tasks_above_60"),
                "final_mean_s_hat": s.get("final_mean_s_hat"),
                "final_eval_success": s.get("final_eval_success"),
                "auc_tasks_above_60": s.get("auc_tasks_above_60"),
                "env_steps": s.get("env_steps"),
                "inference_calls": s.get("inference_calls"),
            })
    return rows


SUMMARY_COLUMNS = ("label", "seed", "final_tasks_above_60", "final_mean_s_hat", "final_eval_success",
                   "auc_tasks_above_60", "env_steps", "inference_calls")
CURVE_COLUMNS = ("label", "round", "seeds") + CURVE_METRICS


def plot_curves(rows: Iterable[dict], metric: str, path: str | Path, ylabel: str | None = None,
                window: int = 1) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_label: dict[str, list[tuple[int, float]]] = {}
    for row in rows:
        if row.get(metric) is not None:
            by_label.setdefault(row["label"], []).append((row["round"], row[metric]))
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    plotted = False
    for label, pts in by_label.items():
        x = np.array([p[0] for p in pts])
        y = np.array([p[1] for p in pts])
        if window > 1:
            n = len(y) // window * window
            if n == 0:
                continue
            x = x[:n].reshape(-1, window)[:, -1]
            y = y[:n].reshape(-1, window).mean(axis=1)
        ax.plot(x + 1, y, marker="o", ms=3, lw=1.5, label=label)
        plotted = True
    ax.set_xlabel("round")
    ax.set_ylabel(ylabel or metric)
    ax.grid(True, alpha=0.3)
    if plotted:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report(runs_by_label: Mapping[str, Sequence[dict]], out_dir: str | Path,
                  window: int = 4) -> list[Path]:
    """Write ``curves.tsv``, ``summary.tsv`` and one PNG per curve metric."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curves = curve_rows(runs_by_label)
    write_tsv(out / "curves.tsv", curves, CURVE_COLUMNS)
    write_tsv(out / "summary.tsv", summary_rows(runs_by_label), SUMMARY_COLUMNS)
    written = [out / "curves.tsv", out / "summary.tsv"]
    figures = {
        "tasks_above_60": ("tasks with success rate > 0.6", 1),
        "high_success_fraction": ("share of trajectories from tasks with s_hat >= 0.8", window),
        "mean_s_hat": ("mean success-rate estimate", 1),
        "eval_success": ("greedy evaluation success", 1),
    }
    for metric, (ylabel, w) in figures.items():
        path = out / f"{metric}.png"
        plot_curves(curves, metric, path, ylabel, w)
        written.append(path)
    return written
