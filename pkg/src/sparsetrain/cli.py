"""Command-line interface.

Subcommands: train (one run), sweep (axis sweep with paired baselines),
analyze (trajectory reports from a .sptj file), pattern check (structured
mask compliance; exit code 0 iff compliant), capacity (search-capacity ratio
from three run summaries).  Report paths emit CSV and render a PNG figure
alongside unless --no-figure is given.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .analytics import (
    classify_sets,
    cumulative_distance,
    delta_by_magnitude_bins,
    inference_threshold,
    search_capacity,
)
from .config import load_config
from .errors import ConfigError
from .patterns import PatternKind, validate_structure
from .runner import run_experiment
from .sweep import sweep
from .trajectory import TrajectoryLog


def _cmd_train(args) -> int:
    config = load_config(args.config)
    if args.output_dir:
        config = dataclasses.replace(config, output_dir=args.output_dir)
    summary = run_experiment(config, write_outputs=True, make_figure=not args.no_figure)
    print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    return 0


def _parse_values(axis: str, raw: str):
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ConfigError("empty --values list")
    if axis == "strategy":
        return parts
    out = []
    for p in parts:
        x = float(p)
        out.append(int(x) if x == int(x) and axis in ("r", "z") else x)
    return out


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    values = _parse_values(args.axis, args.values)
    out_dir = Path(args.out) if args.out else Path(config.output_dir)
    rows, _ = sweep(
        config, args.axis, values, args.seeds, out_dir=out_dir, make_figure=not args.no_figure
    )
    for row in rows:
        print(f"{args.axis}={row['value']}: median task_error {row['median_task_error']:+.4f}")
    print(f"wrote {out_dir / f'sweep_{args.axis}.csv'}")
    return 0


def _write_csv(path, rows, fieldnames) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def _cmd_analyze(args) -> int:
    log = TrajectoryLog.load(args.log)
    stem = Path(args.log).with_suffix("")
    out_csv = Path(args.out) if args.out else Path(f"{stem}_{args.report}.csv")
    fig_path = out_csv.with_suffix(".png")
    total_steps = log.steps[-1] if log.steps else 0

    if args.report == "sets":
        finals = [log.layer_series(i)[-1] for i in range(len(log.layers))]
        tau = inference_threshold([np.asarray(v) for v in finals], args.d)
        evo = classify_sets(log, tau)
        rows = [
            {
                "step": int(s),
                "active_fraction": float(a),
                "inactive_fraction": float(i),
                "undecided_fraction": float(u),
            }
            for s, a, i, u in zip(
                evo.steps, evo.active_fraction, evo.inactive_fraction, evo.undecided_fraction
            )
        ]
        _write_csv(out_csv, rows, list(rows[0]))
        if not args.no_figure:
            from . import figures

            figures.sets_figure(evo, fig_path)
    elif args.report == "distance":
        dist = cumulative_distance(log)
        norm = cumulative_distance(log, normalize=True)
        rows = [
            {"step": int(log.steps[i + 1]), "cumulative": float(dist[i]), "normalized": float(norm[i])}
            for i in range(dist.size)
        ]
        _write_csv(out_csv, rows, list(rows[0]))
        if not args.no_figure:
            from . import figures

            figures.distance_figure([r["step"] for r in rows], dist, norm, fig_path)
    else:  # delta
        profile = delta_by_magnitude_bins(log, args.bins, total_steps=total_steps)
        rows = [
            {
                "bin_lo": float(profile.bin_edges[i]),
                "bin_hi": float(profile.bin_edges[i + 1]),
                "median_delta": float(profile.median_delta[i]),
                "count": int(profile.counts[i]),
                "excluded_constant": int(profile.excluded[i]),
            }
            for i in range(profile.median_delta.size)
        ]
        _write_csv(out_csv, rows, list(rows[0]))
        if not args.no_figure:
            from . import figures

            figures.delta_figure(profile, fig_path)
    print(f"wrote {out_csv}")
    return 0


def _load_tensor(path: str) -> np.ndarray:
    if path.endswith(".npy"):
        return np.load(path)
    with open(path) as f:
        first = f.readline()
    delim = "," if "," in first else None
    return np.loadtxt(path, delimiter=delim, ndmin=2)


def _parse_kind(token: str) -> PatternKind:
    if token in ("1d", "1d:row"):
        return PatternKind("two_four_1d", axis="row")
    if token == "1d:col":
        return PatternKind("two_four_1d", axis="col")
    if token == "2d":
        return PatternKind("two_four_2d")
    if token.startswith("block:"):
        return PatternKind("block", block_size=int(token.split(":", 1)[1]))
    raise ConfigError(f"unknown pattern kind {token!r} (use 1d, 1d:row, 1d:col, 2d, block:<b>)")


def _cmd_pattern_check(args) -> int:
    tensor = _load_tensor(args.tensor)
    kind = _parse_kind(args.kind)
    violations = validate_structure(tensor, kind)
    for v in violations[:50]:
        where = ",".join(str(c) for c in v.coords) if v.coords else "-"
        print(f"violation at ({where}): {v.reason}")
    if len(violations) > 50:
        print(f"... and {len(violations) - 50} more")
    print(f"{len(violations)} violation(s)")
    return 0 if not violations else 1


def _read_score(path: str) -> float:
    with open(path) as f:
        data = json.load(f)
    if "score" not in data:
        raise ConfigError(f"{path} has no 'score' field (not a run summary?)")
    return float(data["score"])


def _cmd_capacity(args) -> int:
    regular = _read_score(args.regular)
    search = _read_score(args.search)
    reduce_ = _read_score(args.reduce)
    raw = search_capacity(regular, search, reduce_)
    print(
        json.dumps(
            {
                "raw": raw,
                "one_minus_raw": 1.0 - raw,
                "note": (
                    "raw = (regular - search) / (regular - reduce): 0 means the sparse "
                    "run matched the dense baseline, 1 means it only matched the "
                    "width-reduced baseline; one_minus_raw is the opposite orientation"
                ),
            },
            indent=2,
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsetrain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one experiment from a config file")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--output-dir", default=None)
    p_train.add_argument("--no-figure", action="store_true")
    p_train.set_defaults(func=_cmd_train)

    p_sweep = sub.add_parser("sweep", help="sweep one axis over several seeds")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--axis", required=True, choices=["r", "s", "z", "d", "t", "strategy"])
    p_sweep.add_argument("--values", required=True, help="comma-separated list")
    p_sweep.add_argument("--seeds", type=int, default=3)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--no-figure", action="store_true")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_an = sub.add_parser("analyze", help="trajectory reports from a .sptj log")
    p_an.add_argument("--log", required=True)
    p_an.add_argument("--report", required=True, choices=["sets", "distance", "delta"])
    p_an.add_argument("--d", type=float, default=0.25, help="inference fraction for 'sets'")
    p_an.add_argument("--bins", type=int, default=10, help="magnitude bins for 'delta'")
    p_an.add_argument("--out", default=None)
    p_an.add_argument("--no-figure", action="store_true")
    p_an.set_defaults(func=_cmd_analyze)

    p_pat = sub.add_parser("pattern", help="structured-sparsity utilities")
    pat_sub = p_pat.add_subparsers(dest="pattern_command", required=True)
    p_check = pat_sub.add_parser("check", help="validate a tensor/mask against a pattern")
    p_check.add_argument("--tensor", required=True, help=".npy or delimited text file")
    p_check.add_argument("--kind", required=True, help="1d | 1d:row | 1d:col | 2d | block:<b>")
    p_check.set_defaults(func=_cmd_pattern_check)

    p_cap = sub.add_parser("capacity", help="search-capacity ratio from three summaries")
    p_cap.add_argument("--regular", required=True)
    p_cap.add_argument("--search", required=True)
    p_cap.add_argument("--reduce", required=True)
    p_cap.set_defaults(func=_cmd_capacity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
