"""Corpus-run report files: deterministic JSON, a timing CSV, and a summary
figure rendered next to them."""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .corpus_run import RunReport


def write_report(report: RunReport, outdir) -> dict:
    """Write report.json (verdicts, deterministic), report.csv (with timings),
    and report.png; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": outdir / "report.json",
        "csv": outdir / "report.csv",
        "png": outdir / "report.png",
    }
    paths["json"].write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    with open(paths["csv"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "theory", "op", "pass", "ms"])
        for r in report.results:
            writer.writerow([r.id, r.theory, r.op, "pass" if r.passed else "fail",
                             f"{r.ms:.1f}"])
    render_figure(report, paths["png"])
    return paths


def render_figure(report: RunReport, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    results = report.results
    if not results:
        fig, ax = plt.subplots(figsize=(6, 2))
        ax.text(0.5, 0.5, "no entries matched", ha="center", va="center")
        ax.axis("off")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        return

    theories = []
    for r in results:
        t = (r.theory or "generated").replace(".thy", "")
        if t not in theories:
            theories.append(t)
    ops = []
    for r in results:
        if r.op not in ops:
            ops.append(r.op)

    fig, (ax1, ax2) = plt.subplots(
        1, 2, figsize=(11, max(3.0, 0.45 * len(theories) + 1.5)),
        gridspec_kw={"width_ratios": [2, 3]})

    # verdict grid: theory x operation, green pass / red fail / grey none
    grid = [[-1] * len(ops) for _ in theories]
    for r in results:
        i = theories.index((r.theory or "generated").replace(".thy", ""))
        j = ops.index(r.op)
        cell = 1 if r.passed else 0
        grid[i][j] = min(grid[i][j], cell) if grid[i][j] != -1 else cell
    colors = {-1: "#e8e8e8", 0: "#c0392b", 1: "#27ae60"}
    for i in range(len(theories)):
        for j in range(len(ops)):
            ax1.add_patch(plt.Rectangle((j, len(theories) - 1 - i), 0.94, 0.94,
                                        color=colors[grid[i][j]]))
    ax1.set_xlim(0, len(ops))
    ax1.set_ylim(0, len(theories))
    ax1.set_xticks([j + 0.5 for j in range(len(ops))])
    ax1.set_xticklabels(ops, rotation=45, ha="right", fontsize=8)
    ax1.set_yticks([len(theories) - 1 - i + 0.5 for i in range(len(theories))])
    ax1.set_yticklabels(theories, fontsize=8)
    ax1.set_title("verdicts reproduced", fontsize=10)
    ax1.set_aspect("equal")

    # timing: horizontal bars per entry
    names = [r.id for r in results]
    times = [r.ms for r in results]
    bar_colors = ["#27ae60" if r.passed else "#c0392b" for r in results]
    y = range(len(names))
    ax2.barh(list(y), times, color=bar_colors)
    ax2.set_yticks(list(y))
    ax2.set_yticklabels(names, fontsize=6)
    ax2.invert_yaxis()
    ax2.set_xlabel("ms", fontsize=8)
    ax2.set_title("entry wall time", fontsize=10)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
