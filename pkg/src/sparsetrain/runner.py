"""Experiment runner: one training run composing net, policy, and logging.

Per-step order (fixed by contract): (a) on the rewiring cadence, recompute or
mutate the participation masks from current weights/gradients; (b) forward
with effective weights; (c) backward to dense gradients; (d) scale gradients
of non-participating entries by s; (e) dense optimizer step over all weights;
(f) exploitation hook; (g) snapshot on the stride.  Runs are a pure function
of (config, seed): data, init, batch, and per-layer policy RNG streams are
derived from the master seed by fixed offsets.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig, config_to_dict
from .errors import ConfigError
from .nn import MLP, SgdMomentum, loss as nn_loss, network_loss_and_grads
from .patterns import mask_24_1d, mask_24_2d, mask_block
from .policy import (
    SparsityPolicy,
    apply_exploitation,
    lottery_mask,
    lottery_rewind,
    reduce_arch,
    rewire_fraction,
    rigl_rewire,
    scale_nonparticipating_grads,
    set_rewire,
    should_rewire,
    topd_mask,
)
from .schedules import LrSchedule, lr_at
from .tasks import Dataset, build_dataset
from .trajectory import TrajectoryLog

SPARSIFY_MIN_DIM = 16  # layers with a dimension below this are exempt from sparsity

SUMMARY_FILE = "summary.json"
METRICS_FILE = "metrics.jsonl"
TRAJECTORY_FILE = "trajectory.sptj"
LOSS_FIGURE_FILE = "loss_curve.png"


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, *stream])


@dataclass
class RunSummary:
    method: str
    seed: int
    task: dict
    policy: dict
    total_steps: int
    steps_trained: int
    final_train_loss: float
    final_train_accuracy: float | None
    final_val_loss: float
    final_val_accuracy: float | None
    score: float
    per_layer_density: dict
    density_targets: dict
    layer_exemptions: dict
    reset_probe_max_abs: float | None
    wall_clock_s: float
    trajectory_file: str = TRAJECTORY_FILE
    metrics_file: str = METRICS_FILE

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _mask_constructor(policy: SparsityPolicy):
    if policy.structure == "unstructured":
        return lambda w: topd_mask(w, policy.d)
    if policy.structure == "two_four_1d":
        return lambda w: mask_24_1d(w, axis="row")
    if policy.structure == "two_four_2d":
        return mask_24_2d
    return lambda w: mask_block(w, policy.block_size, policy.d)


def _structure_exemption(layer, policy: SparsityPolicy) -> str | None:
    if policy.structure == "two_four_1d" and layer.in_dim % 4 != 0:
        return f"in_dim {layer.in_dim} not divisible by 4"
    if policy.structure == "two_four_2d" and (layer.out_dim % 4 or layer.in_dim % 4):
        return f"dims ({layer.out_dim}, {layer.in_dim}) not divisible by 4"
    if policy.structure == "block" and (
        layer.out_dim % policy.block_size or layer.in_dim % policy.block_size
    ):
        return f"dims not divisible by block size {policy.block_size}"
    return None


def _apply_eligibility(net: MLP, policy: SparsityPolicy) -> dict:
    exemptions = {}
    for layer in net.layers:
        if min(layer.in_dim, layer.out_dim) < SPARSIFY_MIN_DIM:
            layer.sparsify = False
            exemptions[layer.name] = (
                f"dims ({layer.out_dim}, {layer.in_dim}) below {SPARSIFY_MIN_DIM}"
            )
            continue
        reason = _structure_exemption(layer, policy)
        if reason is not None:
            layer.sparsify = False
            exemptions[layer.name] = reason
    return exemptions


def _density_target(layer, policy: SparsityPolicy) -> float:
    if not layer.sparsify or policy.method in ("dense", "reduce"):
        return 1.0
    n = layer.weights.size
    if policy.structure in ("two_four_1d", "two_four_2d"):
        return 0.5
    if policy.structure == "block":
        b = policy.block_size
        tiles = (layer.out_dim // b) * (layer.in_dim // b)
        return math.ceil(policy.d * tiles) * b * b / n
    return math.ceil(policy.d * n) / n


def _evaluate(net: MLP, x, y, task_type: str):
    out = net.predict(x)
    value, _ = nn_loss("cross_entropy" if task_type == "classification" else "mse", out, y)
    if task_type == "classification":
        acc = float(np.mean(np.argmax(out, axis=1) == y))
        return value, acc
    return value, None


def _mask_crc(mask: np.ndarray) -> int:
    return zlib.crc32(np.packbits(np.asarray(mask) != 0).tobytes())


def _max_nonparticipating(layer) -> float:
    vals = layer.weights[layer.mask == 0]
    return float(np.abs(vals).max()) if vals.size else 0.0


@dataclass
class _Phase:
    """Everything one training phase produced."""

    metrics: list
    log: TrajectoryLog
    tracked_layers: list
    reset_probe_max_abs: float | None
    steps_trained: int
    bias_snapshot: list | None = None


def _train_phase(
    net: MLP,
    ds: Dataset,
    config: RunConfig,
    policy: SparsityPolicy,
    schedule: LrSchedule,
    *,
    start_step: int = 0,
    mask_mode: str = "policy",  # "none" | "policy" | "fixed"
    s_override: float | None = None,
    track_layers: list | None = None,
    track_all: bool = False,
    bias_probe_step: int | None = None,
) -> _Phase:
    total = config.total_steps
    opt = SgdMomentum(schedule, config.momentum)
    batch_rng = rng_for(config.seed, 3)
    loss_kind = "cross_entropy" if ds.task_type == "classification" else "mse"
    s_eff = policy.s if s_override is None else s_override
    constructor = _mask_constructor(policy)

    if track_layers is None:
        track_layers = [i for i, l in enumerate(net.layers) if l.sparsify]
        if not track_layers:
            track_layers = list(range(len(net.layers)))
    shapes = [(net.layers[i].out_dim, net.layers[i].in_dim) for i in track_layers]
    log = TrajectoryLog.create(
        shapes,
        stride=config.snapshot_stride,
        max_tracked=None if track_all else config.snapshot_max_tracked,
        seed=config.seed,
    )
    log.record_snapshot(start_step, [net.layers[i].weights for i in track_layers])
    bias_snapshot = None
    if bias_probe_step is not None and bias_probe_step == start_step:
        bias_snapshot = [None if l.bias is None else l.bias.copy() for l in net.layers]

    policy_rngs = {i: rng_for(config.seed, 2, i) for i in range(len(net.layers))}
    masked = mask_mode != "none"
    rewiring = mask_mode == "policy" and policy.method in ("search", "set", "rigl")
    metrics: list = []
    reset_probe: float | None = None
    prev_grads: list | None = None
    n_train = ds.x_train.shape[0]

    for t in range(start_step, total):
        rewired = False
        if rewiring and should_rewire(t, policy):
            for i, layer in enumerate(net.layers):
                if not layer.sparsify:
                    continue
                if policy.method == "search":
                    layer.mask = constructor(layer.weights)
                else:
                    if t == start_step:
                        layer.mask = topd_mask(layer.weights, policy.d)
                    else:
                        f = rewire_fraction(t, total, policy.rewire_f0)
                        if policy.method == "set":
                            layer.mask = set_rewire(
                                layer.weights, layer.mask, f, policy_rngs[i]
                            )
                        else:
                            layer.mask = rigl_rewire(
                                layer.weights, layer.mask, prev_grads[i], f
                            )
                    # Sparse-to-sparse semantics: dropped/never-grown entries
                    # hold no value and no stale momentum.
                    nonpart = layer.mask == 0
                    layer.weights[nonpart] = 0
                    vel = opt.velocities.get(f"w{i}")
                    if vel is not None:
                        vel[nonpart] = 0
            rewired = True

        idx = batch_rng.integers(0, n_train, size=config.task.batch_size)
        xb, yb = ds.x_train[idx], ds.y_train[idx]
        loss_val, out, gws, gbs = network_loss_and_grads(net, xb, yb, loss_kind)
        if not np.isfinite(loss_val):
            raise FloatingPointError(f"non-finite loss at step {t}")
        batch_acc = (
            float(np.mean(np.argmax(out, axis=1) == yb))
            if ds.task_type == "classification"
            else None
        )

        for i, layer in enumerate(net.layers):
            g = gws[i]
            if masked and layer.sparsify and s_eff != 1.0:
                g = scale_nonparticipating_grads(g, layer.mask, s_eff)
            opt.update(f"w{i}", layer.weights, g, t)
            if layer.bias is not None:
                opt.update(f"b{i}", layer.bias, gbs[i], t)
            if mask_mode == "policy" and policy.method == "search" and layer.sparsify:
                apply_exploitation(layer.weights, layer.mask, t, policy)
                if (
                    policy.exploitation == "fix"
                    and policy.zero_momentum_on_fix
                    and t == policy.v
                ):
                    opt.velocities[f"w{i}"][layer.mask == 0] = 0
        prev_grads = gws

        rec = {
            "step": t,
            "loss": loss_val,
            "accuracy": batch_acc,
            "lr": lr_at(schedule, t),
            "rewired": rewired,
            "density": {},
            "mask_crc": {},
            "max_nonpart_abs": {},
        }
        for i in track_layers:
            layer = net.layers[i]
            rec["density"][layer.name] = layer.density
            rec["mask_crc"][layer.name] = _mask_crc(layer.mask)
            rec["max_nonpart_abs"][layer.name] = _max_nonparticipating(layer)
        metrics.append(rec)

        if policy.exploitation == "reset" and mask_mode == "policy" and t % policy.z == 0:
            worst = max(rec["max_nonpart_abs"].values(), default=0.0)
            reset_probe = worst if reset_probe is None else max(reset_probe, worst)

        if bias_probe_step is not None and t + 1 == bias_probe_step:
            bias_snapshot = [None if l.bias is None else l.bias.copy() for l in net.layers]
        if (t + 1) % config.snapshot_stride == 0:
            log.record_snapshot(t + 1, [net.layers[i].weights for i in track_layers])

    return _Phase(
        metrics=metrics,
        log=log,
        tracked_layers=track_layers,
        reset_probe_max_abs=reset_probe,
        steps_trained=total - start_step,
        bias_snapshot=bias_snapshot,
    )


def _build_net(config: RunConfig, hidden, in_dim: int, out_dim: int) -> MLP:
    dtype = np.float32 if config.dtype == "float32" else np.float64
    init_rng = rng_for(config.seed, 1)
    return MLP.build(
        [in_dim, *hidden, out_dim], init_rng, dtype=dtype, activation=config.activation
    )


def _schedule(config: RunConfig) -> LrSchedule:
    s = config.schedule
    return LrSchedule(
        base_lr=s.base_lr,
        total_steps=config.total_steps,
        warmup_steps=s.warmup_steps,
        decay=s.decay,
        milestones=tuple(s.milestones),
        drop_factor=s.drop_factor,
        stretch=s.stretch,
    )


def _summarize(
    config: RunConfig,
    policy: SparsityPolicy,
    net: MLP,
    ds: Dataset,
    phase: _Phase,
    exemptions: dict,
    wall_clock: float,
) -> RunSummary:
    train_loss, train_acc = _evaluate(net, ds.x_train, ds.y_train, ds.task_type)
    val_loss, val_acc = _evaluate(net, ds.x_val, ds.y_val, ds.task_type)
    score = val_acc if ds.task_type == "classification" else -val_loss
    return RunSummary(
        method=policy.method,
        seed=config.seed,
        task=config_to_dict(config)["task"],
        policy=config_to_dict(config)["policy"],
        total_steps=config.total_steps,
        steps_trained=phase.steps_trained,
        final_train_loss=train_loss,
        final_train_accuracy=train_acc,
        final_val_loss=val_loss,
        final_val_accuracy=val_acc,
        score=float(score),
        per_layer_density={l.name: l.density for l in net.layers},
        density_targets={l.name: _density_target(l, policy) for l in net.layers},
        layer_exemptions=exemptions,
        reset_probe_max_abs=phase.reset_probe_max_abs,
        wall_clock_s=wall_clock,
    )


def _write_outputs(out_dir: Path, summary: RunSummary, phase: _Phase, make_figure: bool):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / METRICS_FILE, "w") as f:
        for rec in phase.metrics:
            f.write(json.dumps(rec) + "\n")
    phase.log.save(out_dir / TRAJECTORY_FILE)
    with open(out_dir / SUMMARY_FILE, "w") as f:
        json.dump(summary.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    if make_figure:
        from . import figures

        figures.loss_curve(phase.metrics, out_dir / LOSS_FIGURE_FILE)


def run_experiment(
    config: RunConfig, write_outputs: bool = True, make_figure: bool = True
) -> RunSummary:
    """Execute one run; returns its summary (and writes run files by default)."""
    t0 = time.perf_counter()
    policy = config.policy.resolved(config.total_steps)
    ds = build_dataset(config.task, seed=int(rng_for(config.seed, 0).integers(2**31)))
    hidden = list(config.hidden_widths)
    if policy.method == "reduce":
        hidden = reduce_arch(hidden, policy.d, in_dim=ds.in_dim, out_dim=ds.n_outputs)
    net = _build_net(config, hidden, ds.in_dim, ds.n_outputs)
    exemptions = _apply_eligibility(net, policy)
    schedule = _schedule(config)

    if policy.method == "lottery":
        phase = _run_lottery(net, ds, config, policy, schedule)
    else:
        mask_mode = "none" if policy.method in ("dense", "reduce") else "policy"
        s_override = 0.0 if policy.method in ("set", "rigl") else None
        phase = _train_phase(
            net, ds, config, policy, schedule, mask_mode=mask_mode, s_override=s_override
        )

    summary = _summarize(
        config, policy, net, ds, phase, exemptions, time.perf_counter() - t0
    )
    if write_outputs:
        _write_outputs(Path(config.output_dir), summary, phase, make_figure)
    return summary


def _run_lottery(
    net: MLP, ds: Dataset, config: RunConfig, policy: SparsityPolicy, schedule: LrSchedule
) -> _Phase:
    """Dense reference run, then rewind to epsilon and train with a fixed mask."""
    eps = policy.lottery_epsilon
    if eps >= config.total_steps:
        raise ConfigError(f"lottery_epsilon {eps} must be < total_steps {config.total_steps}")
    if eps % config.snapshot_stride != 0:
        raise ConfigError(
            f"lottery_epsilon {eps} must lie on the snapshot grid "
            f"(stride {config.snapshot_stride})"
        )
    dense = SparsityPolicy(method="dense")
    ref = _train_phase(
        net,
        ds,
        config,
        dense,
        schedule,
        mask_mode="none",
        track_layers=list(range(len(net.layers))),
        track_all=True,
        bias_probe_step=eps,
    )
    masks = {
        i: lottery_mask([net.layers[i].weights], policy.d)[0]
        for i, l in enumerate(net.layers)
        if l.sparsify
    }
    rewound = lottery_rewind(ref.log, eps)
    dtype = net.layers[0].weights.dtype
    for i, layer in enumerate(net.layers):
        layer.weights = rewound[i].astype(dtype)
        if layer.bias is not None:
            layer.bias = ref.bias_snapshot[i].copy()
        if i in masks:
            layer.mask = masks[i].astype(dtype)
            layer.weights[layer.mask == 0] = 0
        else:
            layer.mask = np.ones_like(layer.weights)
    return _train_phase(
        net,
        ds,
        config,
        policy,
        schedule,
        start_step=eps,
        mask_mode="fixed",
        s_override=0.0,
    )


def task_error(regular: RunSummary, sparse: RunSummary) -> float:
    """Regular score minus sparse score; positive means the sparse run is worse."""
    if regular.task != sparse.task:
        raise ValueError("summaries come from different tasks")
    if regular.seed != sparse.seed:
        raise ValueError("summaries come from different seed protocols")
    return regular.score - sparse.score
