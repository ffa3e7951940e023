"""Exception types raised across the toolkit.

Every error that callers are expected to catch derives from
:class:`WishiftError`, so the parser fuzz contract ("only defined errors,
no crashes") reduces to catching a single base class.
"""


class WishiftError(Exception):
    """Base class for all toolkit errors."""


# -- capture parsing ---------------------------------------------------------

class TruncatedFrameError(WishiftError):
    """Byte buffer ends before the frame layout is complete."""


class BadMagicError(WishiftError):
    """File or frame does not start with the expected magic bytes."""


class InvalidAntennaError(WishiftError):
    """Antenna id is outside [0, n_ant)."""


class FrameCountMismatchError(WishiftError):
    """Capture header declares a frame count the payload does not contain."""


# -- spectrogram pipeline ----------------------------------------------------

class BadLengthError(WishiftError):
    """Input vector does not have the required length."""


class UnequalGroupLengthsError(WishiftError):
    """Per-antenna packet groups differ in length."""


class EmptyCaptureError(WishiftError):
    """No packets to process."""


class NonFiniteInputError(WishiftError):
    """Input contains NaN or infinity."""


class BadWindowError(WishiftError):
    """Window length exceeds the available packets."""


# -- annotation alignment ----------------------------------------------------

class EmptyInputError(WishiftError):
    """Timestamp list is empty."""


class UnalignedFrameError(WishiftError):
    """Annotation references a camera frame with no matched packet."""


# -- synthetic session generation --------------------------------------------

class UnknownClassError(WishiftError):
    """Activity script references a class with no template."""


class EmptyScriptError(WishiftError):
    """Activity script contains no spans."""


class GridTooSmallError(WishiftError):
    """Benchmark grid lacks the environments or persons a split needs."""


# -- embedding ---------------------------------------------------------------

class PerplexityTooLargeError(WishiftError):
    """Requested perplexity is not attainable for the dataset size."""


class DegenerateDataError(WishiftError):
    """All points identical; affinities are undefined."""


# -- model -------------------------------------------------------------------

class ShapeMismatchError(WishiftError):
    """Tensor shape does not match the model configuration."""


class NonFiniteLossError(WishiftError):
    """Loss evaluated to NaN or infinity."""


class EmptyDatasetError(WishiftError):
    """Dataset has no samples."""


class MissingClassInSupportError(WishiftError):
    """Few-shot support set lacks at least one sample of some class."""


# -- shift reports -----------------------------------------------------------

class NeedTwoGroupsError(WishiftError):
    """Cluster separability needs at least two groups."""


class PartitionEmptyError(WishiftError):
    """Partition produced an empty train or test side."""


# -- files and configs -------------------------------------------------------

class TensorFormatError(WishiftError):
    """Tensor container bytes are malformed."""


class ConfigError(WishiftError):
    """User-supplied configuration is malformed; message names the key."""
