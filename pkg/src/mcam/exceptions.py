"""Typed errors raised by the pipeline.

Every error carries a machine-parsable ``code`` and the process exit status
the command-line front end should use when it escapes.
"""


class McamError(ValueError):
    code = "MCAM_ERROR"
    exit_status = 3

    def __str__(self):
        msg = super().__str__()
        return msg or self.code


class EmptyImage(McamError):
    code = "EMPTY_IMAGE"


class DecodeError(McamError):
    code = "DECODE_ERROR"


class InvalidLayout(McamError):
    code = "INVALID_LAYOUT"


class LayoutMismatch(McamError):
    code = "LAYOUT_MISMATCH"


class UnknownChannel(McamError):
    code = "UNKNOWN_CHANNEL"


class NumericalFailure(McamError):
    code = "NUMERICAL_FAILURE"
    exit_status = 4


class KExceedsSamples(McamError):
    code = "K_EXCEEDS_SAMPLES"


class EmptySet(McamError):
    code = "EMPTY_SET"


class DimMismatch(McamError):
    code = "DIM_MISMATCH"


class ChannelMismatch(McamError):
    code = "CHANNEL_MISMATCH"


class EmptyGallery(McamError):
    code = "EMPTY_GALLERY"


class UnknownGallerySignature(McamError):
    code = "UNKNOWN_GALLERY_SIGNATURE"


class UnknownQuery(McamError):
    code = "UNKNOWN_QUERY"


class MissingTruth(McamError):
    code = "MISSING_TRUTH"


class DatasetNotFound(McamError):
    code = "DATASET_NOT_FOUND"


class InsufficientIdentities(McamError):
    code = "INSUFFICIENT_IDENTITIES"


class MissingRoot(DatasetNotFound):
    code = "MISSING_ROOT"


class EmptyDataset(McamError):
    code = "EMPTY_DATASET"


class VersionMismatch(McamError):
    code = "VERSION_MISMATCH"


class ConfigMismatch(McamError):
    code = "CONFIG_MISMATCH"


class CorruptRecord(McamError):
    code = "CORRUPT_RECORD"

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index
