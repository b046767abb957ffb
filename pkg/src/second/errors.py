"""Typed exceptions shared across the package."""


class SecondError(Exception):
    """Base class for every error this package raises deliberately."""


class ConfigError(SecondError):
    """Invalid run configuration (CLI exit code 2)."""


class DataError(SecondError):
    """Bad or missing backend data (CLI exit code 3)."""


# -- grids / plans ----------------------------------------------------------

class NonDivisibleResolution(ConfigError):
    """A stage resolution is not an exact multiple of the patch size."""


class GridMismatch(SecondError):
    """Two grids cannot be mapped onto each other by an integer ratio."""


class EmptyGrid(SecondError):
    """A grid with zero rows or columns was requested."""


# -- attention --------------------------------------------------------------

class EmptyCrossAttention(SecondError):
    """Cross-attention carries no token rows."""


class ZeroMassAttention(SecondError):
    """An all-zero attention map cannot be normalized."""


class NotNormalized(SecondError):
    """Operation requires a normalized attention map."""


class SinglePatchGrid(SecondError):
    """Entropy is undefined on a one-patch grid."""


class EmptyAccumulator(SecondError):
    """Selection requires at least one accumulated stage map."""


# -- selection --------------------------------------------------------------

class OutOfRangeEntropy(SecondError):
    """Entropy argument outside [0, 1]."""


class NonPositiveLambda(SecondError):
    """Selection sharpness must be strictly positive."""


# -- decoding ---------------------------------------------------------------

class VocabMismatch(SecondError):
    """Logit vectors disagree on vocabulary size."""


class MissingStage(SecondError):
    """Multi-stage contrast needs more stage logits than were supplied."""


class LengthMismatch(SecondError):
    """Per-step sequences disagree in length."""


class IndexOutOfRange(SecondError):
    """A chosen token index does not exist in its logit vector."""


# -- metrics ----------------------------------------------------------------

class DegenerateInput(SecondError):
    """Overlap score is undefined for an empty ground-truth mask."""


class OutOfRange(SecondError):
    """Probability argument outside its valid interval."""


class HypothesisViolated(SecondError):
    """Attention increment has support off the ground-truth mask."""


class EmptyDataset(SecondError):
    """No cases to evaluate."""


# -- tensor dumps -----------------------------------------------------------

class BadMagic(DataError):
    """File does not start with the SECD magic bytes."""


class VersionUnsupported(DataError):
    """SECD version or payload dtype not supported by this reader."""


class ShapeOverflow(DataError):
    """Declared tensor shape exceeds the v1 element budget."""


class TruncatedPayload(DataError):
    """Payload length does not match the declared shape."""


class MissingCase(DataError):
    """Requested case or stage is absent from the dump manifest."""


class ShapeMismatch(DataError):
    """Dump tensor shape disagrees with the stage plan."""


class StageExecutionError(DataError):
    """Backend failure, annotated with the case and stage that caused it."""
