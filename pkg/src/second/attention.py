"""Fused visual attention maps and the cross-stage accumulator.

A stage's signal is the vision encoder's per-patch self-attention scaled
by the summed language-model cross-attention rows (one row per generated
token). Stage maps are normalized before accumulation so every stage
contributes unit mass regardless of its patch count; the accumulator
lives at the finest grid.

Rescaling semantics: upscaling replicates each value over its block and
divides by the block area, so total mass is conserved exactly;
downscaling takes the block mean, which preserves the per-area average
(a block-mean map carries 1/k^2 of the flat sum by construction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyCrossAttention,
    GridMismatch,
    NotNormalized,
    SinglePatchGrid,
    ZeroMassAttention,
)
from .grids import PatchGrid, pool_blocks_mean, replicate_blocks

_SUM_TOL = 1e-9


def _frozen_values(values, patch_count: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size != patch_count:
        raise GridMismatch(f"{arr.size} values for a grid of {patch_count} patches")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("attention values must be finite and nonnegative")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AttentionMap:
    """Nonnegative per-patch scores, row-major over the grid."""

    grid: PatchGrid
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        arr = _frozen_values(self.values, self.grid.patch_count)
        if self.normalized and abs(arr.sum() - 1.0) > _SUM_TOL:
            raise NotNormalized(f"normalized map sums to {arr.sum()!r}")
        object.__setattr__(self, "values", arr)

    @classmethod
    def uniform(cls, grid: PatchGrid) -> "AttentionMap":
        n = grid.patch_count
        return cls(grid, np.full(n, 1.0 / n), normalized=True)

    def as_grid(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    @property
    def total(self) -> float:
        return float(self.values.sum())


def fuse_attention(self_attn: AttentionMap, cross: np.ndarray) -> AttentionMap:
    """Scale self-attention by the summed cross-attention token rows.

    Each generated token contributes its row elementwise; rows carry
    equal weight. The result is unnormalized.
    """
    rows = np.asarray(cross, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    if rows.ndim != 2:
        raise GridMismatch(f"cross-attention must be 2-D rows, got ndim {rows.ndim}")
    if rows.shape[0] == 0:
        raise EmptyCrossAttention("no cross-attention rows")
    if rows.shape[1] != self_attn.grid.patch_count:
        raise GridMismatch(
            f"cross rows of length {rows.shape[1]} vs {self_attn.grid.patch_count} patches"
        )
    if np.any(rows < 0):
        raise ValueError("cross-attention rows must be nonnegative")
    return AttentionMap(self_attn.grid, rows.sum(axis=0) * self_attn.values)


def normalize(attn: AttentionMap) -> AttentionMap:
    """Scale to unit total mass."""
    total = attn.values.sum()
    if total <= 0.0:
        raise ZeroMassAttention("cannot normalize an all-zero attention map")
    return AttentionMap(attn.grid, attn.values / total, normalized=True)


def max_normalize(attn: AttentionMap) -> AttentionMap:
    """Scale so the peak value is 1; an all-zero map passes through."""
    peak = attn.values.max() if attn.values.size else 0.0
    if peak <= 0.0:
        return AttentionMap(attn.grid, attn.values)
    return AttentionMap(attn.grid, attn.values / peak)


def entropy(attn: AttentionMap) -> float:
    """Shannon entropy of a normalized map, scaled by ln(n) into [0, 1]."""
    if not attn.normalized:
        raise NotNormalized("entropy requires a normalized attention map")
    n = attn.grid.patch_count
    if n < 2:
        raise SinglePatchGrid("entropy is undefined for a single patch")
    p = attn.values
    h = -np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0))
    return float(min(max(h / math.log(n), 0.0), 1.0))


def pool_attention(attn: AttentionMap, to: PatchGrid) -> AttentionMap:
    """Map an attention map onto a coarser or finer grid.

    Upscale: replicate each value over its block and divide by the block
    area (total mass unchanged). Downscale: block mean. Non-integer grid
    ratios are rejected.
    """
    src = attn.grid
    if to.shape == src.shape:
        return AttentionMap(to, attn.values)
    if to.rows >= src.rows and to.cols >= src.cols:
        ky, kx = to.rows // src.rows, to.cols // src.cols
        return AttentionMap(to, replicate_blocks(attn.values, src, to) / (ky * kx))
    if to.rows <= src.rows and to.cols <= src.cols:
        return AttentionMap(to, pool_blocks_mean(attn.values, src, to))
    raise GridMismatch(f"cannot rescale {src.shape} to {to.shape}")


@dataclass(frozen=True)
class AttentionAccumulator:
    """Running sum of normalized stage maps, held at the finest grid.

    Value semantics: accumulate() returns a new accumulator, so callers
    own sequencing and instances are safe to share across threads.
    """

    finest_grid: PatchGrid
    values: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        vals = self.values
        if vals is None:
            vals = np.zeros(self.finest_grid.patch_count)
        object.__setattr__(self, "values", _frozen_values(vals, self.finest_grid.patch_count))

    @property
    def total(self) -> float:
        return float(self.values.sum())

    @property
    def is_empty(self) -> bool:
        return self.total <= 0.0

    def as_map(self) -> AttentionMap:
        return AttentionMap(self.finest_grid, self.values)


def accumulate(acc: AttentionAccumulator, stage_attn: AttentionMap) -> AttentionAccumulator:
    """Add one stage's map, normalized then brought to the finest grid.

    Every call deposits total mass 1, so no stage dominates by patch
    count alone. Entries never decrease.
    """
    pooled = pool_attention(normalize(stage_attn), acc.finest_grid)
    return AttentionAccumulator(acc.finest_grid, acc.values + pooled.values)
