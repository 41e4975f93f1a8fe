import json
import math

import numpy as np
import pytest

from sparsetrain import config_from_dict, run_experiment, task_error
from sparsetrain.errors import ConfigError


def tiny_config(policy, total=80, **kw):
    base = {
        "task": {"kind": "spiral_classification", "points_per_class": 40, "batch_size": 16},
        "policy": policy,
        "hidden_widths": [32, 32],
        "total_steps": total,
        "schedule": {"base_lr": 0.1, "warmup_steps": 10},
        "snapshot_stride": 20,
        "seed": 3,
    }
    base.update(kw)
    return config_from_dict(base)


def read_metrics(out_dir):
    with open(out_dir / "metrics.jsonl") as f:
        return [json.loads(line) for line in f]


def test_run_writes_outputs_and_is_deterministic(tmp_path):
    cfg_a = tiny_config({"method": "search", "d": 0.25}, output_dir=str(tmp_path / "a"))
    cfg_b = tiny_config({"method": "search", "d": 0.25}, output_dir=str(tmp_path / "b"))
    sa = run_experiment(cfg_a, make_figure=False)
    sb = run_experiment(cfg_b, make_figure=False)
    da, db = sa.to_dict(), sb.to_dict()
    da.pop("wall_clock_s"), db.pop("wall_clock_s")
    assert da == db
    assert (tmp_path / "a/trajectory.sptj").read_bytes() == (tmp_path / "b/trajectory.sptj").read_bytes()
    assert (tmp_path / "a/metrics.jsonl").read_bytes() == (tmp_path / "b/metrics.jsonl").read_bytes()


def test_density_contract_every_step(tmp_path):
    cfg = tiny_config({"method": "search", "d": 0.25}, output_dir=str(tmp_path))
    summary = run_experiment(cfg, make_figure=False)
    target = math.ceil(0.25 * 32 * 32) / (32 * 32)
    assert summary.per_layer_density["fc1"] == pytest.approx(target)
    assert summary.density_targets["fc1"] == pytest.approx(target)
    for rec in read_metrics(tmp_path):
        assert rec["density"]["fc1"] == pytest.approx(target)


def test_dense_degeneracy_short(tmp_path):
    dense = tiny_config({"method": "dense"}, total=120, output_dir=str(tmp_path / "d"))
    search = tiny_config({"method": "search", "d": 1.0}, total=120, output_dir=str(tmp_path / "s"))
    run_experiment(dense, make_figure=False)
    run_experiment(search, make_figure=False)
    losses_d = [rec["loss"] for rec in read_metrics(tmp_path / "d")]
    losses_s = [rec["loss"] for rec in read_metrics(tmp_path / "s")]
    assert losses_d == losses_s


def test_reset_probe_and_metrics(tmp_path):
    cfg = tiny_config(
        {"method": "search", "d": 0.5, "exploitation": "reset", "z": 25},
        total=80,
        output_dir=str(tmp_path),
    )
    summary = run_experiment(cfg, make_figure=False)
    assert summary.reset_probe_max_abs == 0.0
    for rec in read_metrics(tmp_path):
        if rec["step"] % 25 == 0:
            assert rec["max_nonpart_abs"]["fc1"] == 0.0


def test_fix_freezes_mask(tmp_path):
    cfg = tiny_config(
        {"method": "search", "d": 0.25, "exploitation": "fix", "v": 40},
        total=80,
        output_dir=str(tmp_path),
    )
    run_experiment(cfg, make_figure=False)
    records = read_metrics(tmp_path)
    crcs = {rec["step"]: rec["mask_crc"]["fc1"] for rec in records}
    frozen = {crcs[s] for s in range(40, 80)}
    assert len(frozen) == 1
    for rec in records:
        if rec["step"] >= 40:
            assert rec["max_nonpart_abs"]["fc1"] == 0.0
            assert not rec["rewired"]


def test_rewire_cadence_logged(tmp_path):
    cfg = tiny_config({"method": "search", "d": 0.5, "r": 30}, total=70, output_dir=str(tmp_path))
    run_experiment(cfg, make_figure=False)
    for rec in read_metrics(tmp_path):
        assert rec["rewired"] == (rec["step"] % 30 == 0)


def test_r_beyond_total_freezes_mask_after_step_0(tmp_path):
    cfg = tiny_config({"method": "search", "d": 0.25, "r": 10**9}, total=60, output_dir=str(tmp_path))
    run_experiment(cfg, make_figure=False)
    records = read_metrics(tmp_path)
    assert records[0]["rewired"] and not any(rec["rewired"] for rec in records[1:])
    assert len({rec["mask_crc"]["fc1"] for rec in records}) == 1


def test_stretched_run_hits_milestone_at_stretched_step(tmp_path):
    # warmup 10, span 90, milestone 0.5 -> original drop at step 10+45; with
    # stretch 2 (total 10+180) the drop lands at step 10+90.
    for stretch, total, drop_step in ((1.0, 100, 55), (2.0, 190, 100)):
        out = tmp_path / f"s{stretch}"
        cfg = tiny_config(
            {"method": "dense"},
            total=total,
            schedule={"base_lr": 0.1, "warmup_steps": 10, "milestones": [0.5], "stretch": stretch},
            output_dir=str(out),
        )
        run_experiment(cfg, make_figure=False)
        lr = {rec["step"]: rec["lr"] for rec in read_metrics(out)}
        assert lr[drop_step - 1] == pytest.approx(0.1)
        assert lr[drop_step] == pytest.approx(0.01)


def test_set_and_rigl_preserve_density(tmp_path):
    for method in ("set", "rigl"):
        cfg = tiny_config(
            {"method": method, "d": 0.25, "r": 10, "rewire_f0": 0.3},
            output_dir=str(tmp_path / method),
        )
        summary = run_experiment(cfg, make_figure=False)
        target = math.ceil(0.25 * 32 * 32) / (32 * 32)
        assert summary.per_layer_density["fc1"] == pytest.approx(target)
        recs = read_metrics(tmp_path / method)
        crcs = [rec["mask_crc"]["fc1"] for rec in recs]
        assert len(set(crcs)) > 1  # masks actually moved
        # sparse-to-sparse: non-participating weights stay at zero
        assert all(rec["max_nonpart_abs"]["fc1"] == 0.0 for rec in recs)


def test_structured_run_density_is_half(tmp_path):
    cfg = tiny_config(
        {"method": "search", "d": 0.5, "structure": "two_four_1d"}, output_dir=str(tmp_path)
    )
    summary = run_experiment(cfg, make_figure=False)
    assert summary.per_layer_density["fc1"] == 0.5
    assert summary.density_targets["fc1"] == 0.5
    for rec in read_metrics(tmp_path):
        assert rec["density"]["fc1"] == 0.5  # exactly, at every step


def test_lottery_runs_and_validates_epsilon(tmp_path):
    cfg = tiny_config(
        {"method": "lottery", "d": 0.5, "lottery_epsilon": 20}, output_dir=str(tmp_path)
    )
    summary = run_experiment(cfg, make_figure=False)
    assert summary.steps_trained == 60
    assert summary.per_layer_density["fc1"] == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        run_experiment(
            tiny_config({"method": "lottery", "lottery_epsilon": 7}), write_outputs=False
        )
    with pytest.raises(ConfigError):
        run_experiment(
            tiny_config({"method": "lottery", "lottery_epsilon": 100}), write_outputs=False
        )


def test_reduce_shrinks_hidden_widths():
    cfg = tiny_config({"method": "reduce", "d": 0.25})
    summary = run_experiment(cfg, write_outputs=False)
    assert summary.method == "reduce"
    assert all(v == 1.0 for v in summary.per_layer_density.values())


def test_task_error_sign_convention():
    cfg_dense = tiny_config({"method": "dense"})
    cfg_sparse = tiny_config({"method": "search", "d": 0.25})
    regular = run_experiment(cfg_dense, write_outputs=False)
    sparse = run_experiment(cfg_sparse, write_outputs=False)
    err = task_error(regular, sparse)
    assert err == pytest.approx(regular.score - sparse.score)
    # identical summaries -> 0
    assert task_error(regular, regular) == 0.0


def test_task_error_rejects_mismatched_runs():
    a = run_experiment(tiny_config({"method": "dense"}), write_outputs=False)
    b = run_experiment(
        tiny_config({"method": "dense"}, task={"kind": "teacher_regression", "samples": 60, "batch_size": 16}),
        write_outputs=False,
    )
    with pytest.raises(ValueError):
        task_error(a, b)
    c = run_experiment(tiny_config({"method": "dense"}, seed=4), write_outputs=False)
    with pytest.raises(ValueError):
        task_error(a, c)


def test_metrics_replay_reconstructs_losses(tmp_path):
    cfg = tiny_config({"method": "dense"}, total=50, output_dir=str(tmp_path))
    run_experiment(cfg, make_figure=False)
    first = [rec["loss"] for rec in read_metrics(tmp_path)]
    second = [rec["loss"] for rec in read_metrics(tmp_path)]
    assert first == second
    assert len(first) == 50


def test_snapshot_subsampling_bounds_log_size(tmp_path):
    from sparsetrain import TrajectoryLog

    cfg = tiny_config(
        {"method": "search", "d": 0.5}, total=40, snapshot_max_tracked=100,
        output_dir=str(tmp_path),
    )
    run_experiment(cfg, make_figure=False)
    log = TrajectoryLog.load(tmp_path / "trajectory.sptj")
    assert all(t.indices.size == 100 for t in log.layers)
    assert log.snapshot_count == 3  # steps 0, 20, 40


def test_regression_task_trains():
    cfg = tiny_config(
        {"method": "search", "d": 0.5},
        task={"kind": "teacher_regression", "samples": 80, "batch_size": 16, "in_dim": 4},
        hidden_widths=[24, 24],
        total=60,
    )
    summary = run_experiment(cfg, write_outputs=False)
    assert summary.final_val_accuracy is None
    assert summary.score == pytest.approx(-summary.final_val_loss)
