"""Patch grids, stage plans, and cross-scale resampling primitives.

Stages double the resolution at a fixed patch size, so every cross-scale
mapping reduces to exact integer block replication or block pooling.
Positional embeddings resample bilinearly with cell-center alignment
(sample points sit at patch centers, edges clamp); the alignment choice
is part of this format since square-grid interpolation is otherwise
ambiguous.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .decoding import CDConfig
from .errors import EmptyGrid, GridMismatch, NonDivisibleResolution, NonPositiveLambda

DEFAULT_LAMBDA = 1.0


def _as_pair(value) -> tuple[int, int]:
    if isinstance(value, (tuple, list)):
        h, w = value
        return int(h), int(w)
    return int(value), int(value)


@dataclass(frozen=True)
class PatchGrid:
    """A pixel resolution tiled exactly by square patches."""

    resolution_px: tuple[int, int]
    patch_px: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "resolution_px", _as_pair(self.resolution_px))
        h, w = self.resolution_px
        if h < 1 or w < 1:
            raise EmptyGrid(f"resolution must be positive, got {h}x{w}")
        if self.patch_px < 1:
            raise ValueError(f"patch size must be positive, got {self.patch_px}")
        if h % self.patch_px or w % self.patch_px:
            raise NonDivisibleResolution(
                f"patch size {self.patch_px} does not divide resolution {h}x{w}"
            )

    @property
    def rows(self) -> int:
        return self.resolution_px[0] // self.patch_px

    @property
    def cols(self) -> int:
        return self.resolution_px[1] // self.patch_px

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def patch_count(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class StagePlan:
    """Ordered coarse-to-fine grids sharing one patch size.

    Consecutive stages must double the resolution in both dimensions.
    A single-stage plan is the degenerate baseline (one full pass, no
    selection); plans top out at five stages.
    """

    stages: tuple[PatchGrid, ...]
    lam: float = DEFAULT_LAMBDA
    cd: CDConfig = CDConfig()

    def __post_init__(self) -> None:
        object.__setattr__(self, "stages", tuple(self.stages))
        if not 1 <= len(self.stages) <= 5:
            raise ValueError(f"plans support 1..5 stages, got {len(self.stages)}")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise NonPositiveLambda(f"lambda must be finite and > 0, got {self.lam!r}")
        patch_sizes = {g.patch_px for g in self.stages}
        if len(patch_sizes) != 1:
            raise GridMismatch(f"stages must share one patch size, got {sorted(patch_sizes)}")
        for lo, hi in zip(self.stages, self.stages[1:]):
            (lh, lw), (hh, hw) = lo.resolution_px, hi.resolution_px
            if hh != 2 * lh or hw != 2 * lw:
                raise GridMismatch(
                    f"stage {hh}x{hw} is not exactly 2x the previous {lh}x{lw}"
                )

    @property
    def stage_count(self) -> int:
        return len(self.stages)

    @property
    def finest(self) -> PatchGrid:
        return self.stages[-1]

    @property
    def resolutions(self) -> tuple[int, ...]:
        return tuple(g.resolution_px[0] for g in self.stages)

    @classmethod
    def from_resolutions(cls, resolutions, patch_px: int, lam: float = DEFAULT_LAMBDA,
                         cd: CDConfig = CDConfig()) -> "StagePlan":
        grids = tuple(PatchGrid(_as_pair(r), patch_px) for r in resolutions)
        return cls(stages=grids, lam=lam, cd=cd)


def build_stage_plan(base_resolution, patch_px: int, stage_count: int,
                     lam: float = DEFAULT_LAMBDA, cd: CDConfig = CDConfig()) -> StagePlan:
    """Ladder of stage_count grids halving downward from twice the base.

    The topmost stage runs at 2x the encoder's base resolution and each
    earlier stage halves it, e.g. base 336 with four stages gives
    84 -> 168 -> 336 -> 672.
    """
    if stage_count < 2:
        raise ValueError(f"stage_count must be >= 2, got {stage_count}")
    base_h, base_w = _as_pair(base_resolution)
    top_h, top_w = 2 * base_h, 2 * base_w
    grids = []
    for k in range(stage_count):
        factor = 2 ** (stage_count - 1 - k)
        if top_h % factor or top_w % factor:
            raise NonDivisibleResolution(
                f"base {base_h}x{base_w} cannot be halved {stage_count - 1} times exactly"
            )
        grids.append(PatchGrid((top_h // factor, top_w // factor), patch_px))
    return StagePlan(stages=tuple(grids), lam=lam, cd=cd)


def block_ratio(src: PatchGrid, dst: PatchGrid) -> tuple[int, int]:
    """Integer (row, col) replication factors mapping src onto dst (dst finer)."""
    if dst.rows % src.rows or dst.cols % src.cols:
        raise GridMismatch(f"{dst.shape} is not an integer multiple of {src.shape}")
    return dst.rows // src.rows, dst.cols // src.cols


def replicate_blocks(values: np.ndarray, src: PatchGrid, dst: PatchGrid) -> np.ndarray:
    """Copy each source cell onto its block of destination cells."""
    ky, kx = block_ratio(src, dst)
    grid = values.reshape(src.shape)
    return np.repeat(np.repeat(grid, ky, axis=0), kx, axis=1).reshape(-1)


def pool_blocks_mean(values: np.ndarray, src: PatchGrid, dst: PatchGrid) -> np.ndarray:
    """Average each destination cell's block of source cells."""
    ky, kx = block_ratio(dst, src)
    grid = values.reshape(src.shape)
    return grid.reshape(dst.rows, ky, dst.cols, kx).mean(axis=(1, 3)).reshape(-1)


class ClsStyle(enum.Enum):
    """How a class-token embedding participates in resampling."""

    CLS_PRESERVED = "cls_preserved"
    FULL_INTERP = "full_interp"


@dataclass(frozen=True)
class PositionalEmbeddingGrid:
    """Per-position embedding vectors on a patch grid.

    cls_embedding must be present exactly when the style is CLS_PRESERVED;
    the style comes from backend metadata, never from array shapes.
    """

    grid: tuple[int, int]
    values: np.ndarray  # (rows, cols, dim)
    cls_style: ClsStyle = ClsStyle.FULL_INTERP
    cls_embedding: np.ndarray | None = None

    def __post_init__(self) -> None:
        rows, cols = self.grid
        if rows < 1 or cols < 1:
            raise EmptyGrid(f"embedding grid must be positive, got {rows}x{cols}")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape[:2] != (rows, cols) or vals.ndim != 3:
            raise GridMismatch(
                f"values shape {vals.shape} does not match grid {rows}x{cols}"
            )
        object.__setattr__(self, "values", vals)
        has_cls = self.cls_embedding is not None
        if has_cls != (self.cls_style is ClsStyle.CLS_PRESERVED):
            raise ValueError("cls_embedding presence must match cls_style")
        if has_cls:
            cls_vec = np.asarray(self.cls_embedding, dtype=np.float64)
            if cls_vec.shape != (vals.shape[2],):
                raise GridMismatch(
                    f"cls embedding length {cls_vec.shape} vs dim {vals.shape[2]}"
                )
            object.__setattr__(self, "cls_embedding", cls_vec)

    @property
    def dim(self) -> int:
        return self.values.shape[2]


def _sample_coords(n_src: int, n_dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    coords = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
    coords = np.clip(coords, 0.0, n_src - 1.0)
    lo = np.floor(coords).astype(int)
    hi = np.minimum(lo + 1, n_src - 1)
    return lo, hi, coords - lo


def interpolate_positional_embeddings(src: PositionalEmbeddingGrid,
                                      target_grid) -> PositionalEmbeddingGrid:
    """Bilinearly resample a positional embedding grid, per channel.

    The class token, when present, is copied through untouched; grids
    without one are interpolated in full.
    """
    tr, tc = _as_pair(target_grid)
    if tr < 1 or tc < 1:
        raise EmptyGrid(f"target grid must be positive, got {tr}x{tc}")
    rows, cols = src.grid
    if (tr, tc) == (rows, cols):
        out = src.values
    else:
        y0, y1, wy = _sample_coords(rows, tr)
        x0, x1, wx = _sample_coords(cols, tc)
        wy = wy[:, None, None]
        wx = wx[None, :, None]
        v = src.values
        top = (1.0 - wx) * v[np.ix_(y0, x0)] + wx * v[np.ix_(y0, x1)]
        bot = (1.0 - wx) * v[np.ix_(y1, x0)] + wx * v[np.ix_(y1, x1)]
        out = (1.0 - wy) * top + wy * bot
    return PositionalEmbeddingGrid(
        grid=(tr, tc),
        values=out,
        cls_style=src.cls_style,
        cls_embedding=None if src.cls_embedding is None else src.cls_embedding,
    )
