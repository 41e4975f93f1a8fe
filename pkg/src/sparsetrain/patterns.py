"""Structured-sparsity mask construction and validation.

Three families: 2:4 along one direction (each contiguous group of four keeps
its two largest-magnitude entries), doubly-constrained 2:4 on 4x4 tiles (the
tile pattern with exactly two kept per row AND per column that maximizes the
kept 1-norm, found by exhaustive search over all 90 valid patterns), and
block sparsity (keep whole b x b tiles scored by max magnitude).

Constructors keep exactly two entries per group; validators accept at most
two (the hardware constraint is "at least two zeros").  Tiles and groups are
non-overlapping and aligned at multiples of 4 (or b), row-major.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import StructureError

AXES = ("row", "col")


@dataclass(frozen=True)
class PatternKind:
    """Which structural constraint a mask is supposed to satisfy.

    kind: "two_four_1d" (with ``axis``), "two_four_2d", or "block" (with
    ``block_size``; ``keep_fraction`` additionally pins the kept-tile count
    when given).
    """

    kind: str
    axis: str = "row"
    block_size: int = 4
    keep_fraction: float | None = None

    def __post_init__(self):
        if self.kind not in ("two_four_1d", "two_four_2d", "block"):
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.keep_fraction is not None and not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError("keep_fraction must be in (0, 1]")


@dataclass(frozen=True)
class Violation:
    coords: tuple[int, ...]
    reason: str


_PATTERNS_2D: np.ndarray | None = None


def enumerate_24_2d_patterns() -> np.ndarray:
    """All 4x4 binary matrices with exactly two ones per row and per column.

    Returns an array of shape (90, 4, 4), uint8, in canonical order: ascending
    lexicographic over the row-major flattened pattern.
    """
    global _PATTERNS_2D
    if _PATTERNS_2D is None:
        row_choices = sorted(
            tuple(1 if i in pair else 0 for i in range(4))
            for pair in itertools.combinations(range(4), 2)
        )
        found = []
        for rows in itertools.product(row_choices, repeat=4):
            tile = np.array(rows, dtype=np.uint8)
            if (tile.sum(axis=0) == 2).all():
                found.append(tile)
        _PATTERNS_2D = np.stack(found)
        _PATTERNS_2D.setflags(write=False)
    return _PATTERNS_2D.copy()


def mask_24_1d(weights: np.ndarray, axis: str = "row") -> np.ndarray:
    """2:4 along one direction: per group of four, keep the two largest |w|.

    ``axis`` names the direction a group runs: "row" groups span four
    consecutive columns within a row; "col" spans four consecutive rows within
    a column.  Ties keep the smaller index.  The grouped dimension must be
    divisible by 4.
    """
    w = np.asarray(weights)
    if w.ndim != 2:
        raise StructureError(f"expected a 2-D tensor, got shape {w.shape}")
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    if axis == "col":
        return np.ascontiguousarray(mask_24_1d(np.ascontiguousarray(w.T), "row").T)
    rows, cols = w.shape
    if cols % 4 != 0:
        raise StructureError(f"2:4 groups along rows need cols divisible by 4, got {cols}")
    groups = np.abs(w).reshape(rows, cols // 4, 4)
    order = np.argsort(-groups, axis=-1, kind="stable")
    mask = np.zeros_like(groups, dtype=w.dtype)
    np.put_along_axis(mask, order[..., :2], 1, axis=-1)
    return mask.reshape(rows, cols)


def mask_24_2d(weights: np.ndarray) -> np.ndarray:
    """Per 4x4 tile, the valid 2:4 2D pattern maximizing the kept 1-norm.

    Ties pick the first pattern in canonical order.  Both dimensions must be
    divisible by 4.
    """
    w = np.asarray(weights)
    if w.ndim != 2:
        raise StructureError(f"expected a 2-D tensor, got shape {w.shape}")
    rows, cols = w.shape
    if rows % 4 != 0 or cols % 4 != 0:
        raise StructureError(f"2:4 2D needs both dims divisible by 4, got {w.shape}")
    patterns = enumerate_24_2d_patterns()
    tiles = np.abs(w).astype(np.float64).reshape(rows // 4, 4, cols // 4, 4)
    tiles = tiles.transpose(0, 2, 1, 3)  # (tile_row, tile_col, 4, 4)
    scores = np.tensordot(tiles, patterns.astype(np.float64), axes=([2, 3], [1, 2]))
    best = np.argmax(scores, axis=-1)  # first max: canonical-order tie-break
    mask_tiles = patterns[best]  # (tile_row, tile_col, 4, 4)
    mask = mask_tiles.transpose(0, 2, 1, 3).reshape(rows, cols)
    return mask.astype(w.dtype)


def mask_block(
    weights: np.ndarray,
    b: int,
    keep_fraction: float,
    *,
    scoring: str = "max",
    p: float = 2.0,
) -> np.ndarray:
    """Keep the top ceil(keep_fraction * tiles) b x b tiles, zero the rest.

    Tiles are scored by max |w| (default) or by the p-norm of their entries;
    ties keep the smaller row-major tile index.  Both dims must be divisible
    by b.
    """
    w = np.asarray(weights)
    if w.ndim != 2:
        raise StructureError(f"expected a 2-D tensor, got shape {w.shape}")
    if b < 1:
        raise ValueError(f"block size must be >= 1, got {b}")
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    if scoring not in ("max", "pnorm"):
        raise ValueError(f"scoring must be 'max' or 'pnorm', got {scoring!r}")
    rows, cols = w.shape
    if rows % b != 0 or cols % b != 0:
        raise StructureError(f"block size {b} does not divide dims {w.shape}")
    trows, tcols = rows // b, cols // b
    tiles = np.abs(w).astype(np.float64).reshape(trows, b, tcols, b).transpose(0, 2, 1, 3)
    tiles = tiles.reshape(trows, tcols, b * b)
    if scoring == "max":
        scores = tiles.max(axis=-1)
    else:
        scores = (tiles**p).sum(axis=-1) ** (1.0 / p)
    keep = math.ceil(keep_fraction * trows * tcols)
    order = np.argsort(-scores, axis=None, kind="stable")
    tile_mask = np.zeros(trows * tcols, dtype=np.float64)
    tile_mask[order[:keep]] = 1
    mask = np.kron(tile_mask.reshape(trows, tcols), np.ones((b, b)))
    return mask.astype(w.dtype)


def validate_structure(mask: np.ndarray, kind: PatternKind) -> list[Violation]:
    """Empty list iff the mask satisfies the structural constraint of ``kind``.

    Violations name the offending group/tile coordinates and the reason.
    Validators accept *at most* two kept per group (constructors keep exactly
    two); for blocks, every tile must be kept or dropped whole, and when the
    kind pins a keep_fraction the kept-tile count must equal its ceil.
    """
    m = np.asarray(mask) != 0
    if m.ndim != 2:
        return [Violation((), f"expected a 2-D mask, got shape {np.asarray(mask).shape}")]
    rows, cols = m.shape
    out: list[Violation] = []

    if kind.kind == "two_four_1d":
        if kind.axis == "col":
            inner = validate_structure(m.T, PatternKind("two_four_1d", axis="row"))
            return [Violation(v.coords[::-1], v.reason.replace("cols", "rows")) for v in inner]
        if cols % 4 != 0:
            return [Violation((), f"cols={cols} not divisible by 4")]
        counts = m.reshape(rows, cols // 4, 4).sum(axis=-1)
        for r, g in zip(*np.nonzero(counts > 2)):
            out.append(Violation((int(r), int(g)), f"group keeps {int(counts[r, g])} > 2"))
        return out

    if kind.kind == "two_four_2d":
        if rows % 4 != 0 or cols % 4 != 0:
            return [Violation((), f"dims {m.shape} not divisible by 4")]
        tiles = m.reshape(rows // 4, 4, cols // 4, 4).transpose(0, 2, 1, 3)
        row_counts = tiles.sum(axis=-1)  # (tr, tc, 4)
        col_counts = tiles.sum(axis=-2)
        for tr, tc, i in zip(*np.nonzero(row_counts > 2)):
            out.append(
                Violation((int(tr), int(tc)), f"tile row {int(i)} keeps {int(row_counts[tr, tc, i])} > 2")
            )
        for tr, tc, j in zip(*np.nonzero(col_counts > 2)):
            out.append(
                Violation((int(tr), int(tc)), f"tile col {int(j)} keeps {int(col_counts[tr, tc, j])} > 2")
            )
        return out

    # block
    b = kind.block_size
    if rows % b != 0 or cols % b != 0:
        return [Violation((), f"dims {m.shape} not divisible by block size {b}")]
    counts = m.reshape(rows // b, b, cols // b, b).transpose(0, 2, 1, 3).sum(axis=(-1, -2))
    partial = (counts > 0) & (counts < b * b)
    for tr, tc in zip(*np.nonzero(partial)):
        out.append(
            Violation((int(tr), int(tc)), f"tile partially kept ({int(counts[tr, tc])} of {b * b})")
        )
    if kind.keep_fraction is not None:
        kept = int((counts == b * b).sum())
        expect = math.ceil(kind.keep_fraction * counts.size)
        if kept != expect:
            out.append(Violation((), f"{kept} tiles kept, expected {expect}"))
    return out
