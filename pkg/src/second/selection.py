"""Dynamic patch selection: entropy-driven keep fractions and top-k masks.

The keep fraction maps attention entropy H in [0, 1] through

    p_select = (exp(lambda * H) - 1) / (exp(lambda) - 1)

so a sharply focused map (low H) promotes few patches while a diffuse
one promotes many; larger lambda selects fewer patches at the same H.
Thresholding is strict: with k = clamp(floor(n * fraction), 1, n) and
the k-th largest value as threshold, only strictly greater patches
survive, so ties at the cut are dropped. An all-tied map degenerates to
keeping the lowest-index argmax patch.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .attention import AttentionAccumulator, AttentionMap, entropy, normalize, pool_attention
from .errors import (
    EmptyAccumulator,
    GridMismatch,
    NonPositiveLambda,
    OutOfRangeEntropy,
)
from .grids import DEFAULT_LAMBDA, PatchGrid, StagePlan, replicate_blocks


def _frozen_bits(bits, patch_count: int) -> np.ndarray:
    arr = np.array(bits, dtype=bool).reshape(-1)
    if arr.size != patch_count:
        raise GridMismatch(f"{arr.size} bits for a grid of {patch_count} patches")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PatchMask:
    """Binary keep/drop decision per patch, row-major over the grid."""

    grid: PatchGrid
    bits: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", _frozen_bits(self.bits, self.grid.patch_count))

    @classmethod
    def ones(cls, grid: PatchGrid) -> "PatchMask":
        return cls(grid, np.ones(grid.patch_count, dtype=bool))

    @classmethod
    def zeros(cls, grid: PatchGrid) -> "PatchMask":
        return cls(grid, np.zeros(grid.patch_count, dtype=bool))

    @property
    def kept_count(self) -> int:
        return int(self.bits.sum())

    @property
    def kept_fraction(self) -> float:
        return self.kept_count / self.grid.patch_count

    def as_grid(self) -> np.ndarray:
        return self.bits.reshape(self.grid.shape)

    def union(self, other: "PatchMask") -> "PatchMask":
        if other.grid.shape != self.grid.shape:
            raise GridMismatch(f"mask grids {self.grid.shape} vs {other.grid.shape}")
        return PatchMask(self.grid, self.bits | other.bits)


def upsample_mask(mask: PatchMask, to: PatchGrid) -> PatchMask:
    """Replicate each coarse bit onto its block of fine patches.

    The kept fraction is preserved exactly for any integer ratio.
    """
    if to.shape == mask.grid.shape:
        return PatchMask(to, mask.bits)
    return PatchMask(to, replicate_blocks(mask.bits, mask.grid, to).astype(bool))


class SelectionMode(enum.Enum):
    DYNAMIC = "dynamic"
    FIXED = "fixed"
    REVERSED = "reversed"
    ALL = "all"


@dataclass(frozen=True)
class SelectionConfig:
    """How the next stage's mask is derived from accumulated attention.

    cumulative_union additionally folds the previous stage's mask into
    the next one (off by default: each stage's mask is recomputed from
    the accumulated attention alone).
    """

    lam: float = DEFAULT_LAMBDA
    mode: SelectionMode = SelectionMode.DYNAMIC
    fixed_fraction: float | None = None
    cumulative_union: bool = False

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise NonPositiveLambda(f"lambda must be finite and > 0, got {self.lam!r}")
        if self.mode is SelectionMode.FIXED:
            f = self.fixed_fraction
            if f is None or not 0.0 < f <= 1.0:
                raise ValueError(f"fixed mode needs a fraction in (0, 1], got {f!r}")
        elif self.fixed_fraction is not None:
            raise ValueError(f"fixed_fraction only applies to FIXED mode, got {self.mode}")


def selection_fraction(entropy_h: float, lam: float) -> float:
    """Keep fraction (exp(lam * H) - 1) / (exp(lam) - 1), in [0, 1]."""
    if not (np.isfinite(entropy_h) and 0.0 <= entropy_h <= 1.0):
        raise OutOfRangeEntropy(f"entropy must lie in [0, 1], got {entropy_h!r}")
    if not (np.isfinite(lam) and lam > 0.0):
        raise NonPositiveLambda(f"lambda must be finite and > 0, got {lam!r}")
    return math.expm1(lam * entropy_h) / math.expm1(lam)


def select_patches(attn: AttentionMap, fraction: float) -> PatchMask:
    """Keep the patches strictly above the k-th largest attention value.

    k = clamp(floor(n * fraction), 1, n). Strict comparison drops ties
    at the threshold, so kept_count <= k; if nothing clears it (an
    all-tied map), the lowest-index argmax patch is kept.
    """
    if not (np.isfinite(fraction) and 0.0 <= fraction <= 1.0):
        raise ValueError(f"fraction must lie in [0, 1], got {fraction!r}")
    values = attn.values
    n = values.size
    k = min(max(math.floor(n * fraction), 1), n)
    threshold = np.partition(values, n - k)[n - k]
    bits = values > threshold
    if not bits.any():
        bits = np.zeros(n, dtype=bool)
        bits[int(np.argmax(values))] = True
    return PatchMask(attn.grid, bits)


def init_masks(plan: StagePlan) -> list[PatchMask]:
    """All-ones mask for stage 1, all-zeros for every later stage."""
    masks = [PatchMask.ones(plan.stages[0])]
    masks.extend(PatchMask.zeros(grid) for grid in plan.stages[1:])
    return masks


def advance_stage(acc: AttentionAccumulator, next_grid: PatchGrid,
                  cfg: SelectionConfig) -> PatchMask:
    """Derive the next stage's mask from the accumulated attention.

    The accumulator is pooled onto the next stage's grid so the mask is
    native to the stage it gates. DYNAMIC reads the keep fraction from
    the pooled map's entropy; FIXED uses the configured fraction;
    REVERSED keeps the complement of the DYNAMIC choice; ALL keeps
    everything.
    """
    if acc.is_empty:
        raise EmptyAccumulator("accumulate at least one stage map before selecting")
    if cfg.mode is SelectionMode.ALL:
        return PatchMask.ones(next_grid)
    pooled = pool_attention(acc.as_map(), next_grid)
    if cfg.mode is SelectionMode.FIXED:
        return select_patches(pooled, cfg.fixed_fraction)
    fraction = selection_fraction(entropy(normalize(pooled)), cfg.lam)
    dynamic = select_patches(pooled, fraction)
    if cfg.mode is SelectionMode.DYNAMIC:
        return dynamic
    # REVERSED: complement, clamped back to at least one patch.
    bits = ~dynamic.bits
    if not bits.any():
        bits = np.zeros(next_grid.patch_count, dtype=bool)
        bits[0] = True
    return PatchMask(next_grid, bits)
