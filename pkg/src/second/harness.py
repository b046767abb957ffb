"""Per-case stage loop and dataset evaluation.

Each case walks the plan coarse to fine: run the backend under the
current stage mask, fuse that stage's attention, fold it into the
accumulator, and derive the next stage's mask; the final stage only
contributes logits. Stage logits are then combined per the contrast
mode and scored. A stage whose fused attention carries no mass is
treated as maximally uncertain (uniform) so selection still proceeds.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attention import (
    AttentionAccumulator,
    AttentionMap,
    accumulate,
    fuse_attention,
    max_normalize,
    pool_attention,
)
from .backends import Backend
from .decoding import (
    CDConfig,
    StageLogits,
    greedy_token,
    multi_stage_cd,
    sequence_probability,
    single_stage_cd,
)
from .errors import ConfigError, DataError, EmptyDataset, StageExecutionError
from .grids import StagePlan
from .metrics import (
    NO,
    YES,
    ClassificationReport,
    attention_dice,
    classification_scores,
    hallucination_probability,
)
from .selection import SelectionConfig, advance_stage, init_masks, upsample_mask


class CDMode(enum.Enum):
    NONE = "none"
    SINGLE = "single"
    MULTI = "multi"


@dataclass(frozen=True)
class RunConfig:
    plan: StagePlan
    selection: SelectionConfig = SelectionConfig()
    cd: CDConfig = CDConfig()
    cd_mode: CDMode = CDMode.MULTI
    seed: int = 42
    out_dir: Path | None = None

    def __post_init__(self) -> None:
        stages = self.plan.stage_count
        if self.cd_mode is CDMode.SINGLE and stages < 2:
            raise ConfigError("single-stage contrast needs at least 2 stages")
        if self.cd_mode is CDMode.MULTI and stages < 3:
            raise ConfigError("multi-stage contrast needs at least 3 stages")


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    gold: str
    answer: str
    correct: bool
    p_hal_expert: float
    p_hal_cd: float
    dice_per_stage: tuple[float | None, ...]
    fraction_per_stage: tuple[float | None, ...]
    attention_snapshots: tuple[AttentionMap, ...] | None = None


def _combined_logits(per_stage: list[np.ndarray], cfg: RunConfig) -> np.ndarray:
    """Apply the contrast mode per decode step, aligned on the shortest stage."""
    steps = min(stage.shape[0] for stage in per_stage)
    expert = per_stage[-1][:steps]
    if cfg.cd_mode is CDMode.NONE or len(per_stage) == 1:
        return expert
    if cfg.cd_mode is CDMode.SINGLE:
        amateur = per_stage[0][:steps]
        return np.stack([single_stage_cd(expert[t], amateur[t], cfg.cd.alpha)
                         for t in range(steps)])
    return np.stack([
        multi_stage_cd(StageLogits.from_stage_list([stage[t] for stage in per_stage]), cfg.cd)
        for t in range(steps)
    ])


def _p_hal(step_logits: np.ndarray) -> tuple[float, list[int]]:
    choices = [greedy_token(step_logits[t]) for t in range(step_logits.shape[0])]
    prob = sequence_probability(list(step_logits), choices)
    return hallucination_probability(prob), choices


def run_case(backend: Backend, case_id: str, cfg: RunConfig,
             collect_attention: bool = False) -> CaseResult:
    """Execute the full stage loop for one case and score it."""
    plan = cfg.plan
    if backend.plan.resolutions != plan.resolutions:
        raise DataError(
            f"backend stages {backend.plan.resolutions} do not match plan {plan.resolutions}"
        )
    masks = init_masks(plan)
    acc = AttentionAccumulator(plan.finest)
    gt = backend.gt_mask(case_id)
    per_stage_logits: list[np.ndarray] = []
    dice: list[float | None] = [None] * plan.stage_count
    fractions: list[float | None] = [None] * plan.stage_count
    snapshots: list[AttentionMap] = []

    for idx, grid in enumerate(plan.stages):
        try:
            out = backend.run_stage(case_id, idx, masks[idx])
        except Exception as e:
            raise StageExecutionError(f"case {case_id}, stage {idx + 1}: {e}") from e
        per_stage_logits.append(np.atleast_2d(np.asarray(out.logits, dtype=np.float64)))
        fused = fuse_attention(out.self_attn, out.cross_attn)
        if gt is not None:
            dice[idx] = attention_dice(max_normalize(fused), gt)
        if collect_attention:
            snapshots.append(pool_attention(fused, plan.finest))
        if idx == plan.stage_count - 1:
            break
        if fused.total <= 0.0:
            fused = AttentionMap.uniform(grid)
        acc = accumulate(acc, fused)
        nxt = advance_stage(acc, plan.stages[idx + 1], cfg.selection)
        if cfg.selection.cumulative_union:
            nxt = nxt.union(upsample_mask(masks[idx], nxt.grid))
        masks[idx + 1] = nxt
        fractions[idx + 1] = nxt.kept_fraction

    p_hal_expert, _ = _p_hal(per_stage_logits[-1])
    combined = _combined_logits(per_stage_logits, cfg)
    p_hal_cd, choices = _p_hal(combined)
    answer = YES if choices[0] == 0 else NO
    return CaseResult(
        case_id=case_id,
        gold=backend.gold(case_id),
        answer=answer,
        correct=answer == backend.gold(case_id),
        p_hal_expert=p_hal_expert,
        p_hal_cd=p_hal_cd,
        dice_per_stage=tuple(dice),
        fraction_per_stage=tuple(fractions),
        attention_snapshots=tuple(snapshots) if collect_attention else None,
    )


def run_dataset(backend: Backend, cfg: RunConfig,
                collect_attention: bool = False) -> tuple[ClassificationReport, list[CaseResult]]:
    """Run every backend case; results are order-independent and deterministic."""
    ids = backend.case_ids()
    if not ids:
        raise EmptyDataset("backend has no cases")
    results = [run_case(backend, case_id, cfg, collect_attention) for case_id in ids]
    report = classification_scores([(r.answer, r.gold) for r in results])
    return report, results


# -- emission ----------------------------------------------------------------

def _fmt(value: float | None) -> str:
    return "" if value is None else format(value, ".12g")


def emit_csv(results: list[CaseResult], path, stage_count: int = 4) -> None:
    """Write per-case rows; dice/fraction columns span at least four stages."""
    n_stages = max(4, stage_count)
    header = ["case_id", "gold", "answer", "correct", "p_hal_expert", "p_hal_cd"]
    header += [f"dice_s{s}" for s in range(1, n_stages + 1)]
    header += [f"frac_s{s}" for s in range(2, n_stages + 1)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in results:
            dice = list(r.dice_per_stage) + [None] * (n_stages - len(r.dice_per_stage))
            frac = list(r.fraction_per_stage) + [None] * (n_stages - len(r.fraction_per_stage))
            row = [r.case_id, r.gold, r.answer, int(r.correct),
                   _fmt(r.p_hal_expert), _fmt(r.p_hal_cd)]
            row += [_fmt(v) for v in dice]
            row += [_fmt(v) for v in frac[1:]]
            writer.writerow(row)


def emit_heatmap_pgm(attn: AttentionMap, path) -> None:
    """8-bit binary PGM, linearly scaled so the peak value maps to 255.

    Rounding is half-up; an all-zero map renders black.
    """
    grid = attn.as_grid()
    peak = grid.max()
    scaled = grid * (255.0 / peak) if peak > 0 else np.zeros_like(grid)
    pixels = np.floor(scaled + 0.5).astype(np.uint8)
    header = f"P5\n{attn.grid.cols} {attn.grid.rows}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(pixels.tobytes())


__all__ = [
    "CDMode",
    "RunConfig",
    "CaseResult",
    "run_case",
    "run_dataset",
    "emit_csv",
    "emit_heatmap_pgm",
]
