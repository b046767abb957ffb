"""Per-stage tensor sources: a planted-signal synthetic model and disk dumps.

Both speak one contract: run_stage(case_id, stage_index, mask) returns the
stage's reduced self-attention map, cross-attention token rows, and
per-step logits, with masked-out patches carrying zero self-attention.
Heads and layers are pre-reduced by the producer; the contract only ever
sees single 2-D maps.

Logits follow the answer-token convention: index 0 is the "yes" logit
and index 1 the "no" logit (producers with a larger vocabulary reduce to
the two candidate answer tokens before writing).
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import secd
from .attention import AttentionMap
from .errors import DataError, MissingCase, ShapeMismatch
from .grids import PatchGrid, StagePlan
from .metrics import NO, YES, GroundTruthMask
from .selection import PatchMask


class Capabilities(NamedTuple):
    stage_resolutions: tuple[int, ...]
    vocab_size: int
    cls_style: str


class StageOutput(NamedTuple):
    self_attn: AttentionMap
    cross_attn: np.ndarray  # (tokens, patches)
    logits: np.ndarray      # (steps, vocab)


class Backend(ABC):
    """Read-only tensor source for one stage plan."""

    plan: StagePlan

    @property
    @abstractmethod
    def capabilities(self) -> Capabilities: ...

    @abstractmethod
    def case_ids(self) -> list[str]: ...

    @abstractmethod
    def gold(self, case_id: str) -> str: ...

    @abstractmethod
    def gt_mask(self, case_id: str) -> GroundTruthMask | None:
        """Ground-truth mask for overlap reporting; None for gold-no cases."""

    @abstractmethod
    def run_stage(self, case_id: str, stage_index: int, mask: PatchMask) -> StageOutput: ...

    def _grid(self, stage_index: int) -> PatchGrid:
        if not 0 <= stage_index < self.plan.stage_count:
            raise MissingCase(f"stage index {stage_index} outside plan of {self.plan.stage_count}")
        return self.plan.stages[stage_index]


# -- synthetic --------------------------------------------------------------

# Logit margin is MARGIN_SCALE * x + MARGIN_BIAS where x is the attention
# overlap with the planted object (its complement for gold-no cases): a
# fully-found object answers at p ~ 0.88 and a fully-missed one at ~0.12.
MARGIN_SCALE = 4.0
MARGIN_BIAS = -2.0


@dataclass(frozen=True)
class SyntheticConfig:
    """Planted-rectangle fixture knobs (defaults match the shipped fixture)."""

    cases: int = 200
    noise_sigma: float = 0.65
    signal_gain: float = 1.0
    yes_fraction: float = 0.5
    object_px: tuple[int, int] = (200, 560)
    seed: int = 42

    def __post_init__(self) -> None:
        lo, hi = self.object_px
        if self.cases < 1 or self.noise_sigma < 0 or self.signal_gain <= 0:
            raise ValueError("cases must be >= 1, noise_sigma >= 0, signal_gain > 0")
        if not 0.0 <= self.yes_fraction <= 1.0 or lo < 1 or hi < lo:
            raise ValueError(f"bad yes_fraction or object_px range: {self!r}")


@dataclass(frozen=True)
class SyntheticCase:
    """One planted case; everything derives deterministically from seed."""

    case_id: str
    gt: GroundTruthMask
    gold: str
    noise_sigma: float
    signal_gain: float
    seed: int


def make_synthetic_cases(cfg: SyntheticConfig, resolution_px: tuple[int, int]) -> list[SyntheticCase]:
    """Plant one random rectangle per case at the given pixel resolution."""
    height, width = resolution_px
    lo, hi = cfg.object_px
    hi = min(hi, height, width)
    lo = min(lo, hi)
    cases = []
    for i in range(cfg.cases):
        rng = np.random.default_rng([cfg.seed, i])
        rect_h = int(rng.integers(lo, hi + 1))
        rect_w = int(rng.integers(lo, hi + 1))
        top = int(rng.integers(0, height - rect_h + 1))
        left = int(rng.integers(0, width - rect_w + 1))
        bits = np.zeros((height, width), dtype=bool)
        bits[top:top + rect_h, left:left + rect_w] = True
        gold = YES if rng.random() < cfg.yes_fraction else NO
        cases.append(SyntheticCase(
            case_id=f"case{i:04d}",
            gt=GroundTruthMask(bits),
            gold=gold,
            noise_sigma=cfg.noise_sigma,
            signal_gain=cfg.signal_gain,
            seed=int(rng.integers(0, 2 ** 63)),
        ))
    return cases


class SyntheticBackend(Backend):
    """Attention and logits planted around each case's ground-truth mask.

    Self-attention is max(0, g_i * gain + noise) gated by the stage mask,
    with noise drawn from a stream keyed by (case seed, stage grid) so
    identical stages coincide across plans. The single cross-attention
    row is uniform over kept patches.
    """

    def __init__(self, plan: StagePlan, cfg: SyntheticConfig = SyntheticConfig()):
        self.plan = plan
        self.cfg = cfg
        self._cases = {c.case_id: c for c in
                       make_synthetic_cases(cfg, plan.finest.resolution_px)}
        self._g_cache: dict[tuple[str, tuple[int, int]], np.ndarray] = {}

    @property
    def capabilities(self) -> Capabilities:
        return Capabilities(self.plan.resolutions, vocab_size=2, cls_style="full_interp")

    def case_ids(self) -> list[str]:
        return list(self._cases)

    def _case(self, case_id: str) -> SyntheticCase:
        try:
            return self._cases[case_id]
        except KeyError:
            raise MissingCase(f"unknown case {case_id!r}") from None

    def gold(self, case_id: str) -> str:
        return self._case(case_id).gold

    def gt_mask(self, case_id: str) -> GroundTruthMask | None:
        case = self._case(case_id)
        return case.gt if case.gold == YES else None

    def _patch_averages(self, case: SyntheticCase, grid: PatchGrid) -> np.ndarray:
        key = (case.case_id, grid.shape)
        if key not in self._g_cache:
            self._g_cache[key] = case.gt.per_patch_avg(grid)
        return self._g_cache[key]

    def run_stage(self, case_id: str, stage_index: int, mask: PatchMask) -> StageOutput:
        grid = self._grid(stage_index)
        if mask.grid.shape != grid.shape:
            raise ShapeMismatch(f"mask grid {mask.grid.shape} vs stage grid {grid.shape}")
        case = self._case(case_id)
        g = self._patch_averages(case, grid)
        rng = np.random.default_rng([case.seed, grid.rows, grid.cols])
        noise = rng.normal(0.0, case.noise_sigma, grid.patch_count) \
            if case.noise_sigma > 0 else np.zeros(grid.patch_count)
        self_vals = np.maximum(0.0, g * case.signal_gain + noise) * mask.bits
        kept = max(mask.kept_count, 1)
        cross_row = mask.bits / kept
        total = self_vals.sum()
        overlap = float(np.dot(self_vals, g) / total) if total > 0 else 0.0
        x = overlap if case.gold == YES else 1.0 - overlap
        margin = MARGIN_SCALE * x + MARGIN_BIAS
        logits = np.array([[margin, 0.0]])
        return StageOutput(AttentionMap(grid, self_vals), cross_row[None, :], logits)


# -- tensor dumps -----------------------------------------------------------

@dataclass(frozen=True)
class DumpStageEntry:
    resolution: tuple[int, int]
    self_attn: Path
    cross_attn: Path
    logits: Path


@dataclass(frozen=True)
class DumpCase:
    case_id: str
    gold: str
    gt_mask_path: Path | None
    stages: dict[tuple[int, int], DumpStageEntry] = field(default_factory=dict)


def _manifest_resolution(value) -> tuple[int, int]:
    if isinstance(value, (list, tuple)):
        h, w = value
        return int(h), int(w)
    return int(value), int(value)


class TensorDump:
    """Parsed manifest plus existence checks for every referenced file."""

    def __init__(self, root: Path):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.is_file():
            raise MissingCase(f"no manifest.json under {self.root}")
        try:
            manifest = json.loads(manifest_path.read_text())
        except json.JSONDecodeError as e:
            raise DataError(f"{manifest_path}: invalid JSON ({e})") from e
        self.cls_style = str(manifest.get("cls_style", "full_interp"))
        self.cases: dict[str, DumpCase] = {}
        for entry in manifest.get("cases", []):
            case_id = str(entry["id"])
            gold = str(entry["gold"])
            if gold not in (YES, NO):
                raise DataError(f"case {case_id}: gold must be yes/no, got {gold!r}")
            mask_rel = entry.get("gt_mask_path")
            stages = {}
            for stage in entry["stages"]:
                res = _manifest_resolution(stage["resolution"])
                stages[res] = DumpStageEntry(
                    resolution=res,
                    self_attn=self.root / stage["self_attn"],
                    cross_attn=self.root / stage["cross_attn"],
                    logits=self.root / stage["logits"],
                )
            self.cases[case_id] = DumpCase(
                case_id=case_id,
                gold=gold,
                gt_mask_path=self.root / mask_rel if mask_rel else None,
                stages=stages,
            )
        self._check_files()

    def _check_files(self) -> None:
        for case in self.cases.values():
            paths = [case.gt_mask_path] if case.gt_mask_path else []
            for stage in case.stages.values():
                paths += [stage.self_attn, stage.cross_attn, stage.logits]
            for path in paths:
                if not path.is_file():
                    raise DataError(f"manifest references missing file {path}")


class DumpBackend(Backend):
    """Replays recorded stage tensors, applying masks by zeroing."""

    def __init__(self, root, plan: StagePlan):
        self.plan = plan
        self.dump = TensorDump(Path(root))

    @property
    def capabilities(self) -> Capabilities:
        first = next(iter(self.dump.cases.values()), None)
        if first is None:
            return Capabilities((), vocab_size=0, cls_style=self.dump.cls_style)
        resolutions = tuple(sorted(res[0] for res in first.stages))
        entry = next(iter(first.stages.values()))
        vocab = int(secd.read_tensor(entry.logits).shape[-1])
        return Capabilities(resolutions, vocab_size=vocab, cls_style=self.dump.cls_style)

    def case_ids(self) -> list[str]:
        return list(self.dump.cases)

    def _case(self, case_id: str) -> DumpCase:
        try:
            return self.dump.cases[case_id]
        except KeyError:
            raise MissingCase(f"case {case_id!r} not in manifest") from None

    def gold(self, case_id: str) -> str:
        return self._case(case_id).gold

    def gt_mask(self, case_id: str) -> GroundTruthMask | None:
        case = self._case(case_id)
        if case.gt_mask_path is None:
            return None
        mask = secd.read_tensor(case.gt_mask_path)
        if mask.ndim != 2:
            raise ShapeMismatch(f"{case.gt_mask_path}: mask must be 2-D, got {mask.shape}")
        return GroundTruthMask(mask > 0.5)

    def run_stage(self, case_id: str, stage_index: int, mask: PatchMask) -> StageOutput:
        grid = self._grid(stage_index)
        case = self._case(case_id)
        entry = case.stages.get(grid.resolution_px)
        if entry is None:
            raise MissingCase(
                f"case {case_id}: no stage at {grid.resolution_px} "
                f"(dump has {sorted(case.stages)})"
            )
        n = grid.patch_count
        self_vals = secd.read_tensor(entry.self_attn).reshape(-1)
        if self_vals.size != n:
            raise ShapeMismatch(
                f"{entry.self_attn}: {self_vals.size} attention values for {n} patches"
            )
        cross = np.atleast_2d(secd.read_tensor(entry.cross_attn))
        if cross.ndim != 2 or cross.shape[1] != n:
            raise ShapeMismatch(f"{entry.cross_attn}: cross rows of shape {cross.shape}")
        logits = np.atleast_2d(secd.read_tensor(entry.logits))
        if logits.ndim != 2 or logits.shape[1] < 2:
            raise ShapeMismatch(f"{entry.logits}: logits of shape {logits.shape}")
        masked = self_vals.astype(np.float64) * mask.bits
        return StageOutput(AttentionMap(grid, masked), cross.astype(np.float64),
                           logits.astype(np.float64))
