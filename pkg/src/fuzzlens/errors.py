"""Exception types shared across modules.

Kept in one place so the CLI can map them onto distinct exit codes.
"""


class FuzzlensError(Exception):
    """Base for all library errors."""


class ShapeError(FuzzlensError):
    """Input/weight shape mismatch; carries the offending layer index."""

    def __init__(self, layer_index, message):
        super().__init__(f"layer {layer_index}: {message}")
        self.layer_index = layer_index


class ModelSpecError(FuzzlensError):
    """Layer chain does not type-check end to end."""


class ModelFormatError(FuzzlensError):
    """Model file is malformed or from an incompatible version."""


class TrainingDivergedError(FuzzlensError):
    """Loss became NaN/Inf during training."""


class UnsupportedLayerError(FuzzlensError):
    """An operation hit a layer kind it does not support."""


class EmptyCodebookError(FuzzlensError):
    """Classification was requested against a codebook with no codewords."""


class NoExplanationError(FuzzlensError):
    """The requested class has no stored codewords (distinct from
    classification failure)."""


class CodebookFormatError(FuzzlensError):
    """Codebook file is malformed or inconsistent with expectations."""


class MetadataMismatchError(FuzzlensError):
    """Artifacts (model/codebook/config) disagree on M, N, method or delta."""


class IdxError(FuzzlensError):
    """Base for IDX container problems."""


class IdxMagicError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


class IdxCountMismatchError(IdxError):
    pass


class ConfigError(FuzzlensError):
    """Bad run configuration (file or flags)."""
