"""Weight-trajectory logs and their binary file format.

A log records, at increasing steps, the values of a fixed tracked subset of
each layer's weights.  Tracked indices are chosen once at creation (all
entries, or a seeded uniform subsample to bound memory) and never change.

File format (little-endian), extension .sptj:
    magic "SPTJ", u32 version=1, u32 layer_count,
    per layer: u32 rows, u32 cols, u32 tracked_count, tracked flat indices (u32),
    u32 snapshot_count,
    per snapshot: u64 step, tracked values (f32) concatenated in layer order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import SequenceError, ShapeError

MAGIC = b"SPTJ"
VERSION = 1


@dataclass
class LayerTrack:
    rows: int
    cols: int
    indices: np.ndarray  # sorted flat row-major indices, uint32


@dataclass
class TrajectoryLog:
    layers: list[LayerTrack]
    stride: int = 1
    steps: list[int] = field(default_factory=list)
    values: list[list[np.ndarray]] = field(default_factory=list)
    _step_index: dict[int, int] = field(default_factory=dict, repr=False)

    @classmethod
    def create(cls, shapes, stride: int = 1, max_tracked: int | None = 4096, seed: int = 0):
        """Set up tracking for layers of the given (rows, cols) shapes.

        With ``max_tracked`` set, layers larger than that track a seeded
        uniform subsample of entries; ``None`` tracks everything.
        """
        if stride < 1:
            raise ValueError(f"stride must be >= 1, got {stride}")
        layers = []
        rng = np.random.default_rng(seed)
        for rows, cols in shapes:
            n = rows * cols
            if max_tracked is not None and n > max_tracked:
                idx = np.sort(rng.choice(n, size=max_tracked, replace=False))
            else:
                idx = np.arange(n)
            layers.append(LayerTrack(rows=rows, cols=cols, indices=idx.astype(np.uint32)))
        return cls(layers=layers, stride=stride)

    @property
    def snapshot_count(self) -> int:
        return len(self.steps)

    def record_snapshot(self, step: int, weights) -> "TrajectoryLog":
        """Append tracked values at ``step``; steps must be strictly increasing."""
        if self.steps and step <= self.steps[-1]:
            raise SequenceError(
                f"snapshot step {step} not after last recorded step {self.steps[-1]}"
            )
        if len(weights) != len(self.layers):
            raise ShapeError(f"expected {len(self.layers)} layer tensors, got {len(weights)}")
        snap = []
        for track, w in zip(self.layers, weights):
            w = np.asarray(w)
            if w.shape != (track.rows, track.cols):
                raise ShapeError(
                    f"snapshot tensor shape {w.shape} != ({track.rows}, {track.cols})"
                )
            snap.append(w.reshape(-1)[track.indices].astype(np.float32))
        self._step_index[step] = len(self.steps)
        self.steps.append(int(step))
        self.values.append(snap)
        return self

    def snapshot_index(self, step: int) -> int:
        if step not in self._step_index:
            raise KeyError(f"no snapshot recorded at step {step}")
        return self._step_index[step]

    def layer_series(self, layer: int) -> np.ndarray:
        """Tracked values of one layer over time, shape (snapshots, tracked)."""
        if not self.values:
            raise ValueError("log has no snapshots")
        return np.stack([snap[layer] for snap in self.values])

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<II", VERSION, len(self.layers)))
            for track in self.layers:
                f.write(struct.pack("<III", track.rows, track.cols, track.indices.size))
                f.write(track.indices.astype("<u4").tobytes())
            f.write(struct.pack("<I", len(self.steps)))
            for step, snap in zip(self.steps, self.values):
                f.write(struct.pack("<Q", step))
                for vals in snap:
                    f.write(vals.astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "TrajectoryLog":
        with open(path, "rb") as f:
            data = f.read()
        off = 0

        def take(n):
            nonlocal off
            chunk = data[off : off + n]
            if len(chunk) != n:
                raise ValueError(f"truncated trajectory file {path}")
            off += n
            return chunk

        if take(4) != MAGIC:
            raise ValueError(f"{path} is not a trajectory file (bad magic)")
        version, layer_count = struct.unpack("<II", take(8))
        if version != VERSION:
            raise ValueError(f"unsupported trajectory version {version}")
        layers = []
        for _ in range(layer_count):
            rows, cols, tracked = struct.unpack("<III", take(12))
            idx = np.frombuffer(take(4 * tracked), dtype="<u4").copy()
            layers.append(LayerTrack(rows=rows, cols=cols, indices=idx))
        (snapshot_count,) = struct.unpack("<I", take(4))
        steps, values = [], []
        for _ in range(snapshot_count):
            (step,) = struct.unpack("<Q", take(8))
            snap = [
                np.frombuffer(take(4 * t.indices.size), dtype="<f4").copy() for t in layers
            ]
            steps.append(step)
            values.append(snap)
        stride = steps[1] - steps[0] if len(steps) >= 2 else 1
        log = cls(layers=layers, stride=stride, steps=steps, values=values)
        log._step_index = {s: i for i, s in enumerate(steps)}
        return log


def record_snapshot(log: TrajectoryLog, step: int, weights) -> TrajectoryLog:
    """Functional alias for :meth:`TrajectoryLog.record_snapshot`."""
    return log.record_snapshot(step, weights)
