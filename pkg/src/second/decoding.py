"""Stage-contrastive logit arithmetic and greedy token choice.

Single contrast amplifies the final stage against one amateur:

    out = expert + alpha * (expert - amateur)

The multi-stage form telescopes the contrast across consecutive stage
intervals with coefficients alpha, beta, gamma (gamma is dropped for
three-stage plans). Evaluation order is fixed expert-first so that the
beta = gamma = 0 case reduces to the single contrast bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IndexOutOfRange, LengthMismatch, MissingStage, VocabMismatch

DEFAULT_ALPHA = 0.7
DEFAULT_BETA = 0.7
DEFAULT_GAMMA = 1.0


@dataclass(frozen=True)
class CDConfig:
    """Contrast coefficients, each constrained to [0, 1]."""

    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not np.isfinite(v) or not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")


def _as_logits(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"logit vector must be 1-D and non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("logit vector contains non-finite values")
    return arr


@dataclass(frozen=True)
class StageLogits:
    """One decode step's logits across stages, coarsest amateur first.

    Four-stage plans populate amateur1..3; three-stage plans leave
    amateur1 unset. Plans with more than four stages contribute their
    first three stages as amateurs and the final stage as the expert.
    """

    expert: np.ndarray
    amateur3: np.ndarray
    amateur2: np.ndarray
    amateur1: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.expert is None or self.amateur3 is None or self.amateur2 is None:
            raise MissingStage("expert, amateur3, and amateur2 are all required")
        vectors = [self.expert, self.amateur3, self.amateur2]
        if self.amateur1 is not None:
            vectors.append(self.amateur1)
        sizes = {v.shape for v in map(_as_logits, vectors)}
        if len(sizes) != 1:
            raise VocabMismatch(f"stage logits disagree on vocab size: {sorted(sizes)}")

    @classmethod
    def from_stage_list(cls, per_stage: Sequence[np.ndarray]) -> "StageLogits":
        """Map an ordered per-stage logit list onto contrast slots."""
        if len(per_stage) < 3:
            raise MissingStage(
                f"multi-stage contrast needs at least 3 stages, got {len(per_stage)}"
            )
        if len(per_stage) == 3:
            return cls(expert=per_stage[2], amateur3=per_stage[1], amateur2=per_stage[0])
        return cls(
            expert=per_stage[-1],
            amateur3=per_stage[2],
            amateur2=per_stage[1],
            amateur1=per_stage[0],
        )


def single_stage_cd(expert, amateur, alpha: float) -> np.ndarray:
    """Return expert + alpha * (expert - amateur), elementwise."""
    e = _as_logits(expert)
    a = _as_logits(amateur)
    if e.shape != a.shape:
        raise VocabMismatch(f"expert {e.shape} vs amateur {a.shape}")
    return e + alpha * (e - a)


def multi_stage_cd(stages: StageLogits, cfg: CDConfig) -> np.ndarray:
    """Telescoped contrast across stage intervals.

    The gamma term exists only when amateur1 is present; for three-stage
    plans cfg.gamma is ignored.
    """
    out = stages.expert + cfg.alpha * (stages.expert - stages.amateur3)
    out = out + cfg.beta * (stages.amateur3 - stages.amateur2)
    if stages.amateur1 is not None:
        out = out + cfg.gamma * (stages.amateur2 - stages.amateur1)
    return out


def greedy_token(logits) -> int:
    """Lowest index among the maxima of a logit vector (vocab >= 2)."""
    arr = _as_logits(logits)
    if arr.size < 2:
        raise ValueError(f"vocab size must be at least 2, got {arr.size}")
    return int(np.argmax(arr))


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def sequence_probability(step_logits: Sequence, chosen: Sequence[int]) -> float:
    """Product over steps of softmax(logits_t)[chosen_t], accumulated in log space."""
    if len(step_logits) != len(chosen):
        raise LengthMismatch(f"{len(step_logits)} logit steps vs {len(chosen)} choices")
    total = 0.0
    for t, (logits, token) in enumerate(zip(step_logits, chosen)):
        arr = _as_logits(logits)
        if not 0 <= token < arr.size:
            raise IndexOutOfRange(f"step {t}: token {token} outside vocab of {arr.size}")
        total += float(_log_softmax(arr)[token])
    return float(np.exp(total))
