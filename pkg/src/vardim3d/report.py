"""Delimited run outputs and their companion matplotlib figures.

Every CLI command that produces numbers writes them as tab/comma-delimited
text and, where a curve makes sense, renders a PNG next to it.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def write_train_log(log, out_dir, stem="train_log") -> str:
    """Line-delimited step records (step, epoch, lr, loss) as CSV."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{stem}.csv")
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["step", "epoch", "lr", "loss"])
        writer.writeheader()
        for rec in log.steps:
            writer.writerow(rec)
    return path


def write_metrics(metrics: dict, out_dir, stem="metrics") -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{stem}.csv")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric", "value"])
        for key, value in metrics.items():
            if isinstance(value, (int, float)):
                writer.writerow([key, value])
    return path


def plot_training_curves(log, out_dir, stem="curves") -> str:
    """Loss and learning-rate curves for one training run."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{stem}.png")
    fig, axes = plt.subplots(1, 3 if log.epochs and "accuracy" in log.epochs[0] else 2,
                             figsize=(11, 3.2))
    steps = [r["step"] for r in log.steps]
    axes[0].plot(steps, [r["loss"] for r in log.steps], lw=0.8)
    axes[0].set_xlabel("step")
    axes[0].set_ylabel("loss")
    axes[1].plot(steps, [r["lr"] for r in log.steps], lw=0.8, color="tab:orange")
    axes[1].set_xlabel("step")
    axes[1].set_ylabel("learning rate")
    if len(axes) > 2:
        axes[2].plot([e["epoch"] for e in log.epochs],
                     [e["accuracy"] for e in log.epochs],
                     marker="o", ms=3, color="tab:green")
        axes[2].set_xlabel("epoch")
        axes[2].set_ylabel("train accuracy")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_schedule(schedule, lrs, out_dir, stem="schedule") -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{stem}.png")
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(range(len(lrs)), lrs)
    ax.set_xlabel("step")
    ax.set_ylabel("learning rate")
    ax.set_title(schedule.kind)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
