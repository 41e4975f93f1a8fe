"""Sweep driver: vary one axis, run several seeds, report median task errors.

Axes: r (rewiring cadence), s (non-participating gradient scale), z (reset
period), d (participation fraction), t (schedule stretch; total steps scale
with it), strategy (named exploration/exploitation variants).  Every point
runs once per seed and is paired with a dense baseline on the same seed to
compute the task error.
"""

from __future__ import annotations

import csv
import dataclasses
from pathlib import Path

import numpy as np

from .config import RunConfig
from .errors import ConfigError
from .policy import SparsityPolicy
from .runner import RunSummary, run_experiment, task_error

AXES = ("r", "s", "z", "d", "t", "strategy")

STRATEGIES = ("no-explore", "no-exploit", "fix", "reset", "regularize")


def apply_axis_value(config: RunConfig, axis: str, value) -> RunConfig:
    """A copy of ``config`` with one swept knob changed."""
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}, expected one of {AXES}")
    pol = config.policy
    if axis == "r":
        return _with_policy(config, dataclasses.replace(pol, method="search", r=int(value)))
    if axis == "s":
        return _with_policy(config, dataclasses.replace(pol, method="search", s=float(value)))
    if axis == "z":
        return _with_policy(
            config,
            dataclasses.replace(pol, method="search", exploitation="reset", z=int(value)),
        )
    if axis == "d":
        return _with_policy(config, dataclasses.replace(pol, method="search", d=float(value)))
    if axis == "t":
        t = float(value)
        if t < 1.0:
            raise ConfigError(f"stretch t must be >= 1, got {t}")
        sched = dataclasses.replace(config.schedule, stretch=t)
        base_span = config.total_steps - config.schedule.warmup_steps
        total = config.schedule.warmup_steps + int(round(base_span * t))
        return dataclasses.replace(config, schedule=sched, total_steps=total)
    # strategy
    if value not in STRATEGIES:
        raise ConfigError(f"unknown strategy {value!r}, expected one of {STRATEGIES}")
    if value == "no-explore":
        newpol = dataclasses.replace(pol, method="reduce", exploitation="none", v=None, z=None)
    elif value == "no-exploit":
        newpol = dataclasses.replace(pol, method="search", exploitation="none", v=None, z=None)
    else:
        newpol = dataclasses.replace(pol, method="search", exploitation=value)
    return _with_policy(config, newpol)


def _with_policy(config: RunConfig, policy: SparsityPolicy) -> RunConfig:
    return dataclasses.replace(config, policy=policy)


def _seeded(config: RunConfig, seed: int) -> RunConfig:
    return dataclasses.replace(config, seed=seed)


def sweep(
    config: RunConfig,
    axis: str,
    values,
    n_seeds: int,
    out_dir=None,
    make_figure: bool = True,
):
    """One run per (value, seed) plus paired dense baselines; medians per value.

    Returns (summary_rows, detail_rows).  When ``out_dir`` is given, writes
    sweep_<axis>.csv, sweep_<axis>_runs.csv, and a PNG alongside.
    """
    if n_seeds < 3:
        raise ConfigError("sweeps need at least 3 seeds per point")
    seeds = [config.seed + i for i in range(n_seeds)]

    def dense_config(cfg: RunConfig) -> RunConfig:
        return _with_policy(
            cfg, dataclasses.replace(cfg.policy, method="dense", exploitation="none", v=None, z=None)
        )

    baselines: dict[tuple, RunSummary] = {}

    def baseline_for(cfg: RunConfig, value, seed) -> RunSummary:
        # The dense reference depends on the seed, and on the value only for
        # the t axis (regular and sparse are trained for the same duration).
        key = (seed, value if axis == "t" else None)
        if key not in baselines:
            baselines[key] = run_experiment(dense_config(cfg), write_outputs=False)
        return baselines[key]

    detail_rows = []
    summary_rows = []
    for value in values:
        errors = []
        for seed in seeds:
            cfg = _seeded(apply_axis_value(config, axis, value), seed)
            sparse = run_experiment(cfg, write_outputs=False)
            regular = baseline_for(cfg, value, seed)
            err = task_error(regular, sparse)
            errors.append(err)
            detail_rows.append(
                {
                    "axis": axis,
                    "value": value,
                    "seed": seed,
                    "regular_score": regular.score,
                    "sparse_score": sparse.score,
                    "task_error": err,
                }
            )
        summary_rows.append(
            {
                "axis": axis,
                "value": value,
                "n_seeds": n_seeds,
                "median_task_error": float(np.median(errors)),
            }
        )

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(out_dir / f"sweep_{axis}.csv", summary_rows)
        _write_csv(out_dir / f"sweep_{axis}_runs.csv", detail_rows)
        if make_figure:
            from . import figures

            figures.sweep_figure(summary_rows, axis, out_dir / f"sweep_{axis}.png")
    return summary_rows, detail_rows


def _write_csv(path, rows) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
