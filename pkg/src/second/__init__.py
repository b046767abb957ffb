"""Selective multi-scale patch decoding with stage-contrastive logits."""

from .attention import (
    AttentionAccumulator,
    AttentionMap,
    accumulate,
    entropy,
    fuse_attention,
    max_normalize,
    normalize,
    pool_attention,
)
from .backends import (
    Backend,
    Capabilities,
    DumpBackend,
    StageOutput,
    SyntheticBackend,
    SyntheticCase,
    SyntheticConfig,
    TensorDump,
    make_synthetic_cases,
)
from .decoding import (
    CDConfig,
    StageLogits,
    greedy_token,
    multi_stage_cd,
    sequence_probability,
    single_stage_cd,
)
from .grids import (
    ClsStyle,
    PatchGrid,
    PositionalEmbeddingGrid,
    StagePlan,
    build_stage_plan,
    interpolate_positional_embeddings,
)
from .harness import (
    CaseResult,
    CDMode,
    RunConfig,
    emit_csv,
    emit_heatmap_pgm,
    run_case,
    run_dataset,
)
from .metrics import (
    ClassificationReport,
    DiceReport,
    GroundTruthMask,
    attention_dice,
    bernoulli_patch_stats,
    classification_scores,
    dice_monotonicity_oracle,
    hallucination_probability,
)
from .secd import read_tensor, write_tensor
from .selection import (
    PatchMask,
    SelectionConfig,
    SelectionMode,
    advance_stage,
    init_masks,
    select_patches,
    selection_fraction,
    upsample_mask,
)

__version__ = "0.1.0"
