"""Matplotlib rendering of evaluation reports to image files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def plot_accuracy_curves(reports: dict, path) -> None:
    """Recognition rate vs number of touches, one line per method."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, report in reports.items():
        ax.plot(report.touch_counts, report.accuracies, marker="o", label=name)
    ax.set_xlabel("Number of touches")
    ax.set_ylabel("Recognition rate")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep(sweep, path) -> None:
    """Accuracy at the designated touch count across the weight grid."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if len(sweep.inputs) == 2:
        xs = [w[0] for w, _ in sweep.rows]
        ys = [r.accuracy_at(sweep.designated_touch) for _, r in sweep.rows]
        ax.plot(xs, ys, marker="o")
        ax.set_xlabel(f"weight on {sweep.inputs[0]}")
    else:
        # group lines by the second weight, x axis is the first weight
        by_w2 = {}
        for w, r in sweep.rows:
            by_w2.setdefault(w[1], []).append((w[0], r.accuracy_at(sweep.designated_touch)))
        for w2 in sorted(by_w2):
            pts = sorted(by_w2[w2])
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                    label=f"{sweep.inputs[1]}={w2:g}")
        ax.set_xlabel(f"weight on {sweep.inputs[0]}")
        ax.legend(fontsize=7)
    ax.set_ylabel(f"Recognition rate at {sweep.designated_touch} touches")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
