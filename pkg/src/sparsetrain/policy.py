"""Training-time sparsity policies.

The main method keeps the top d-proportion of weights (by magnitude, per
layer) participating, rewires the mask every r steps, scales gradients of
non-participating weights by s, and optionally exploits late in training by
fixing the mask (fix), zeroing non-participating weights every z steps
(reset), or decaying them by (1 - beta) per step (regularize).  Baselines:
dense, width-reduced (reduce), rewind-to-snapshot with a final-magnitude mask
(lottery), and drop/grow rewiring by random growth (set) or by gradient
magnitude (rigl).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .trajectory import TrajectoryLog

METHODS = ("dense", "search", "reduce", "lottery", "set", "rigl")
EXPLOITATIONS = ("none", "fix", "reset", "regularize")
STRUCTURES = ("unstructured", "two_four_1d", "two_four_2d", "block")

DEFAULT_FIX_FRACTION = 0.5
DEFAULT_RESET_PERIOD = 1000
DEFAULT_REGULARIZE_BETA = 2e-4


@dataclass(frozen=True)
class SparsityPolicy:
    """Full configuration of a sparsity method.

    ``v`` may be given as a float in (0, 1] (fraction of total steps) or as an
    integer step count; call :meth:`resolved` before the training loop to pin
    it (and the z / beta defaults) to concrete values.
    """

    method: str = "dense"
    d: float = 1.0
    r: int = 1
    s: float = 1.0
    exploitation: str = "none"
    v: float | int | None = None
    z: int | None = None
    beta: float | None = None
    structure: str = "unstructured"
    block_size: int = 4
    rewire_f0: float = 0.3
    lottery_epsilon: int = 0
    zero_momentum_on_fix: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.exploitation not in EXPLOITATIONS:
            raise ConfigError(
                f"unknown exploitation {self.exploitation!r}, expected one of {EXPLOITATIONS}"
            )
        if self.structure not in STRUCTURES:
            raise ConfigError(
                f"unknown structure {self.structure!r}, expected one of {STRUCTURES}"
            )
        if not 0.0 < self.d <= 1.0:
            raise ConfigError(f"d must be in (0, 1], got {self.d}")
        if self.r < 1:
            raise ConfigError(f"r must be >= 1, got {self.r}")
        if not 0.0 <= self.s <= 1.0:
            raise ConfigError(f"s must be in [0, 1], got {self.s}")
        if self.beta is not None and not 0.0 <= self.beta < 1.0:
            raise ConfigError(f"beta must be in [0, 1), got {self.beta}")
        if self.block_size < 1:
            raise ConfigError(f"block_size must be >= 1, got {self.block_size}")
        if not 0.0 <= self.rewire_f0 <= 1.0:
            raise ConfigError(f"rewire_f0 must be in [0, 1], got {self.rewire_f0}")
        if self.lottery_epsilon < 0:
            raise ConfigError("lottery_epsilon must be >= 0")
        if self.exploitation != "none" and self.method not in ("search",):
            raise ConfigError(
                f"exploitation {self.exploitation!r} only applies to method 'search'"
            )
        if self.structure != "unstructured" and self.method not in ("search", "dense", "reduce"):
            raise ConfigError(f"structured masks not supported for method {self.method!r}")

    def resolved(self, total_steps: int) -> "SparsityPolicy":
        """Pin v to steps and fill exploitation defaults; validates v, z >= 1."""
        changes = {}
        if self.structure in ("two_four_1d", "two_four_2d"):
            if self.d == 1.0:
                changes["d"] = 0.5
            elif self.d != 0.5:
                raise ConfigError(f"structure {self.structure} implies d=0.5, got d={self.d}")
        if self.exploitation == "fix":
            v = DEFAULT_FIX_FRACTION if self.v is None else self.v
            if isinstance(v, float) and 0.0 < v <= 1.0:
                v = int(round(v * total_steps))
            v = int(v)
            if v < 1:
                raise ConfigError(f"fix step v must be >= 1, got {v}")
            changes["v"] = v
        if self.exploitation == "reset":
            z = DEFAULT_RESET_PERIOD if self.z is None else int(self.z)
            if z < 1:
                raise ConfigError(f"reset period z must be >= 1, got {z}")
            changes["z"] = z
        if self.exploitation == "regularize":
            beta = DEFAULT_REGULARIZE_BETA if self.beta is None else self.beta
            changes["beta"] = beta
        return replace(self, **changes) if changes else self


def topd_mask(weights: np.ndarray, d: float) -> np.ndarray:
    """Keep the ceil(d*N) entries of largest |w|; ties keep the smaller row-major index."""
    w = np.asarray(weights)
    if w.size == 0:
        raise ValueError("empty tensor")
    if not 0.0 < d <= 1.0:
        raise ValueError(f"d must be in (0, 1], got {d}")
    k = math.ceil(d * w.size)
    order = np.argsort(-np.abs(w), axis=None, kind="stable")
    mask = np.zeros(w.size, dtype=w.dtype)
    mask[order[:k]] = 1
    return mask.reshape(w.shape)


def should_rewire(step: int, policy: SparsityPolicy) -> bool:
    """True on the rewiring cadence, unless Fix has frozen the mask."""
    if step < 0:
        raise ValueError("step must be >= 0")
    if step % policy.r != 0:
        return False
    if policy.exploitation == "fix":
        if not isinstance(policy.v, int):
            raise ConfigError("fix policy must be resolved() before use")
        if step >= policy.v:
            return False
    return True


def scale_nonparticipating_grads(grads: np.ndarray, mask: np.ndarray, s: float) -> np.ndarray:
    """Scale gradients of masked-out entries by s; participating entries untouched."""
    if grads.shape != mask.shape:
        raise ValueError(f"shape mismatch {grads.shape} vs {mask.shape}")
    if s == 1.0:
        return grads
    out = grads.copy()
    out[mask == 0] *= s
    return out


def apply_exploitation(
    weights: np.ndarray, mask: np.ndarray, step: int, policy: SparsityPolicy
) -> np.ndarray:
    """Post-update hook on non-participating weights; participating entries never change.

    fix: zero them once step >= v.  reset: zero them when step % z == 0.
    regularize: multiply them by (1 - beta) every step.  Modifies ``weights``
    in place and returns it.
    """
    mode = policy.exploitation
    if mode == "none":
        return weights
    nonpart = mask == 0
    if mode == "fix":
        if step >= policy.v:
            weights[nonpart] = 0
    elif mode == "reset":
        if step % policy.z == 0:
            weights[nonpart] = 0
    elif mode == "regularize":
        weights[nonpart] *= 1.0 - policy.beta
    return weights


def rewire_fraction(step: int, total: int, f0: float) -> float:
    """Linearly decaying rewire fraction: f0 at step 0, 0 at the end."""
    if total <= 0:
        raise ValueError("total must be > 0")
    return max(f0 * (1.0 - step / total), 0.0)


def _drop_weakest(weights: np.ndarray, mask: np.ndarray, f: float):
    """Shared SET/RigL drop rule; returns (k, active idx to drop, inactive idx)."""
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"f must be in [0, 1], got {f}")
    if weights.shape != mask.shape:
        raise ValueError(f"shape mismatch {weights.shape} vs {mask.shape}")
    flat_mask = mask.reshape(-1)
    active = np.flatnonzero(flat_mask != 0)
    inactive = np.flatnonzero(flat_mask == 0)
    k = math.floor(f * active.size)
    k = min(k, inactive.size)
    if k == 0:
        return 0, active[:0], inactive
    mags = np.abs(weights.reshape(-1)[active])
    order = np.argsort(mags, kind="stable")  # ties: smaller index dropped first
    return k, active[order[:k]], inactive


def set_rewire(weights: np.ndarray, mask: np.ndarray, f: float, rng) -> np.ndarray:
    """Drop the floor(f*|p|) weakest participating entries; grow as many at random.

    Newly participating weights are zeroed in place.  Population count is
    preserved (the drop count is clamped to the available inactive slots).
    """
    k, dropped, inactive = _drop_weakest(weights, mask, f)
    new_mask = mask.copy()
    if k == 0:
        return new_mask
    grown = rng.choice(inactive, size=k, replace=False)
    flat = new_mask.reshape(-1)
    flat[dropped] = 0
    flat[grown] = 1
    weights.reshape(-1)[grown] = 0
    return new_mask


def rigl_rewire(
    weights: np.ndarray, mask: np.ndarray, dense_grads: np.ndarray, f: float
) -> np.ndarray:
    """SET's drop rule, but grow the inactive entries of largest |gradient|."""
    if dense_grads.shape != weights.shape:
        raise ValueError(f"grads shape {dense_grads.shape} != weights {weights.shape}")
    k, dropped, inactive = _drop_weakest(weights, mask, f)
    new_mask = mask.copy()
    if k == 0:
        return new_mask
    gmags = np.abs(dense_grads.reshape(-1)[inactive])
    order = np.argsort(-gmags, kind="stable")  # ties: smaller index grown first
    grown = inactive[order[:k]]
    flat = new_mask.reshape(-1)
    flat[dropped] = 0
    flat[grown] = 1
    weights.reshape(-1)[grown] = 0
    return new_mask


def lottery_mask(trained_weights: list[np.ndarray], d: float) -> list[np.ndarray]:
    """Per-layer top-d masks computed from the final weights of a finished run."""
    return [topd_mask(w, d) for w in trained_weights]


def lottery_rewind(snapshots: TrajectoryLog, epsilon: int) -> list[np.ndarray]:
    """Weights recorded at step epsilon, reshaped per layer.

    Requires a full-coverage log (every entry tracked); raises KeyError if no
    snapshot exists at that step.
    """
    idx = snapshots.snapshot_index(epsilon)
    out = []
    for li, track in enumerate(snapshots.layers):
        if track.indices.size != track.rows * track.cols:
            raise ValueError(
                f"layer {li} is subsampled ({track.indices.size} of "
                f"{track.rows * track.cols} tracked); rewind needs full coverage"
            )
        vals = np.empty(track.rows * track.cols, dtype=np.float32)
        vals[track.indices] = snapshots.values[idx][li]
        out.append(vals.reshape(track.rows, track.cols))
    return out


def reduce_arch(hidden_widths, d: float, *, in_dim: int, out_dim: int) -> list[int]:
    """Scale hidden widths uniformly so total weight count is ~ d * original.

    The multiplier is found by bisection on the integer-rounded parameter
    count of the chain in_dim -> h1 -> ... -> hk -> out_dim (weights only).
    """
    if not 0.0 < d <= 1.0:
        raise ValueError(f"d must be in (0, 1], got {d}")
    hidden = [int(h) for h in hidden_widths]
    if not hidden or any(h < 1 for h in hidden):
        raise ValueError("hidden_widths must be non-empty positive counts")

    def params(widths):
        dims = [in_dim, *widths, out_dim]
        return sum(a * b for a, b in zip(dims[:-1], dims[1:]))

    if d == 1.0:
        return hidden
    target = d * params(hidden)

    def widths_at(m):
        return [int(math.floor(m * h + 0.5)) for h in hidden]

    lo, hi = 0.0, 1.0
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if params(widths_at(mid)) >= target:
            hi = mid
        else:
            lo = mid
    best = None
    for m in (lo, hi):
        w = widths_at(m)
        gap = abs(params(w) - target)
        if best is None or gap < best[0]:
            best = (gap, w)
    widths = best[1]
    if any(h < 1 for h in widths):
        raise ValueError(f"d={d} reduces a hidden width below 1 (got {widths})")
    return widths
