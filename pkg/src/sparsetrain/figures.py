"""Figure rendering for CLI report paths (PNG next to the delimited output)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def _save(fig, path):
    fig.savefig(path, dpi=150)
    plt.close(fig)


def loss_curve(metrics: list, path) -> None:
    steps = [m["step"] for m in metrics]
    losses = [m["loss"] for m in metrics]
    fig, ax = plt.subplots(figsize=(6, 3.5), constrained_layout=True)
    ax.plot(steps, losses, lw=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("batch loss")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def sweep_figure(rows: list, axis: str, path) -> None:
    numeric = all(isinstance(r["value"], (int, float)) for r in rows)
    xs = [r["value"] for r in rows]
    ys = [r["median_task_error"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5), constrained_layout=True)
    if numeric:
        ax.plot(xs, ys, marker="o")
        if axis in ("r", "z") and min(xs) > 0 and max(xs) / max(min(xs), 1e-12) > 30:
            ax.set_xscale("log")
    else:
        ax.bar(range(len(xs)), ys)
        ax.set_xticks(range(len(xs)), [str(x) for x in xs], rotation=20)
    ax.set_xlabel(axis)
    ax.set_ylabel("median task error")
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def sets_figure(evolution, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 3.5), constrained_layout=True)
    ax.stackplot(
        evolution.steps,
        evolution.active_fraction,
        evolution.undecided_fraction,
        evolution.inactive_fraction,
        labels=["active", "undecided", "inactive"],
        alpha=0.8,
    )
    ax.set_xlabel("step")
    ax.set_ylabel("fraction")
    ax.set_ylim(0, 1)
    ax.legend(loc="center right", fontsize=8)
    _save(fig, path)


def distance_figure(steps, cumulative, normalized, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 3.5), constrained_layout=True)
    ax.plot(steps, cumulative, marker=".", lw=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("cumulative distance")
    ax.grid(True, alpha=0.3)
    right = ax.twinx()
    right.plot(steps, normalized, alpha=0)  # same curve; report the 0..1 scale
    right.set_ylabel("normalized")
    _save(fig, path)


def delta_figure(profile, path) -> None:
    centers = 0.5 * (profile.bin_edges[:-1] + profile.bin_edges[1:])
    fig, ax = plt.subplots(figsize=(5.5, 3.5), constrained_layout=True)
    ax.plot(centers, profile.median_delta, marker="o")
    ax.set_xlabel("final |w| (bin center)")
    ax.set_ylabel("median decorrelation time")
    ax.set_ylim(0, 1.05)
    ax.grid(True, alpha=0.3)
    _save(fig, path)
