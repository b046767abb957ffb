"""Diagnostics: hallucination probability, attention overlap, yes/no scores.

The overlap score between a per-patch attention map alpha (values in
[0, 1]) and per-patch ground-truth averages g is

    dice = 2 * sum(alpha_i * g_i) / (sum(alpha_i) + sum(g_i))

An increment with support only on fully-masked patches can never lower
it; dice_monotonicity_oracle checks that claim both directly and via the
equivalent closed-form product and insists the two agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .attention import AttentionMap
from .errors import (
    DegenerateInput,
    EmptyDataset,
    GridMismatch,
    HypothesisViolated,
    OutOfRange,
)
from .grids import PatchGrid

YES = "yes"
NO = "no"


@dataclass(frozen=True)
class GroundTruthMask:
    """Pixel-level binary object mask with per-patch averaging."""

    pixel_bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.pixel_bits)
        if bits.ndim != 2:
            raise ValueError(f"pixel mask must be 2-D, got shape {bits.shape}")
        bits = bits.astype(bool)
        bits.setflags(write=False)
        object.__setattr__(self, "pixel_bits", bits)

    @property
    def resolution_px(self) -> tuple[int, int]:
        return self.pixel_bits.shape

    @property
    def area(self) -> int:
        return int(self.pixel_bits.sum())

    def per_patch_avg(self, grid: PatchGrid) -> np.ndarray:
        """Mean mask coverage per patch of the given grid, row-major."""
        h, w = self.pixel_bits.shape
        if h % grid.rows or w % grid.cols:
            raise GridMismatch(
                f"mask {h}x{w} does not tile into a {grid.rows}x{grid.cols} grid"
            )
        by, bx = h // grid.rows, w // grid.cols
        blocks = self.pixel_bits.reshape(grid.rows, by, grid.cols, bx)
        return blocks.mean(axis=(1, 3), dtype=np.float64).reshape(-1)


@dataclass(frozen=True)
class DiceReport:
    stage: int
    dice: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.dice <= 1.0:
            raise ValueError(f"dice must lie in [0, 1], got {self.dice!r}")


def _dice_raw(alpha: np.ndarray, g: np.ndarray) -> float:
    return float(2.0 * np.dot(alpha, g) / (alpha.sum() + g.sum()))


def attention_dice(attn: AttentionMap, gt: GroundTruthMask) -> float:
    """Overlap between attention scores in [0, 1] and patch mask averages.

    Callers bring raw attention into [0, 1] first (peak-normalization via
    max_normalize is the convention here). An empty ground-truth mask is
    an error rather than zero: maskless cases have nothing to overlap.
    """
    alpha = attn.values
    if np.any(alpha > 1.0 + 1e-9):
        raise ValueError(f"attention values must lie in [0, 1], max is {alpha.max()!r}")
    g = gt.per_patch_avg(attn.grid)
    if g.sum() <= 0.0:
        raise DegenerateInput("ground-truth mask is empty")
    return _dice_raw(np.minimum(alpha, 1.0), g)


def hallucination_probability(seq_prob: float) -> float:
    """1 minus the model's probability of its own generated sequence."""
    if not (np.isfinite(seq_prob) and 0.0 < seq_prob <= 1.0):
        raise OutOfRange(f"sequence probability must lie in (0, 1], got {seq_prob!r}")
    return 1.0 - seq_prob


def dice_monotonicity_oracle(alpha: AttentionMap, delta: AttentionMap,
                             gt: GroundTruthMask, *,
                             enforce_hypothesis: bool = True) -> bool:
    """Check that an on-mask attention increment cannot lower the overlap.

    Computes dice(alpha) and dice(alpha + delta) directly, evaluates the
    equivalent closed form  0 <= sum(delta) * (sum(alpha * (1 - g)) + sum(g)),
    and raises if the two disagree. With enforce_hypothesis=False the
    support restriction is skipped and only the direct comparison is
    returned, which allows demonstrating that off-mask increments can
    lower the score.
    """
    if delta.grid.shape != alpha.grid.shape:
        raise GridMismatch(f"delta grid {delta.grid.shape} vs alpha {alpha.grid.shape}")
    g = gt.per_patch_avg(alpha.grid)
    if g.sum() <= 0.0:
        raise DegenerateInput("ground-truth mask is empty")
    d = delta.values
    if enforce_hypothesis and np.any((d > 0) & (g < 1.0)):
        raise HypothesisViolated("delta has support on patches not fully inside the mask")
    before = _dice_raw(alpha.values, g)
    after = _dice_raw(alpha.values + d, g)
    direct = after >= before
    if enforce_hypothesis:
        closed_form = d.sum() * (np.dot(alpha.values, 1.0 - g) + g.sum()) >= 0.0
        if closed_form != direct:
            raise AssertionError(
                f"closed form ({closed_form}) disagrees with direct comparison "
                f"({before!r} -> {after!r})"
            )
    return direct


def bernoulli_patch_stats(p: float, m: int, trials: int, seed: int) -> tuple[float, float]:
    """Empirical mean and std of patch averages over m*m Bernoulli(p) pixels.

    The std is expected to scale as sqrt(p * (1 - p)) / m.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    if m < 1 or trials < 1:
        raise ValueError(f"m and trials must be positive, got m={m}, trials={trials}")
    rng = np.random.default_rng(seed)
    g = (rng.random((trials, m * m)) < p).mean(axis=1)
    return float(g.mean()), float(g.std())


@dataclass(frozen=True)
class ClassificationReport:
    """Binary confusion counts and rates with 'yes' as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0


def classification_scores(answers: Sequence[tuple[str, str]]) -> ClassificationReport:
    """Score (predicted, gold) yes/no pairs."""
    if not answers:
        raise EmptyDataset("no answers to score")
    tp = fp = tn = fn = 0
    for predicted, gold in answers:
        if predicted not in (YES, NO) or gold not in (YES, NO):
            raise ValueError(f"answers must be '{YES}' or '{NO}', got {(predicted, gold)!r}")
        if gold == YES:
            tp, fn = (tp + 1, fn) if predicted == YES else (tp, fn + 1)
        else:
            fp, tn = (fp + 1, tn) if predicted == YES else (fp, tn + 1)
    return ClassificationReport(tp=tp, fp=fp, tn=tn, fn=fn)
