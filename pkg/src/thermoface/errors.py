"""Exception hierarchy shared by all thermoface modules."""


class ThermofaceError(Exception):
    """Base class for every error raised by this package."""


# --- image / landmark ingestion ---

class MalformedHeader(ThermofaceError):
    pass


class UnsupportedMaxval(ThermofaceError):
    pass


class TruncatedData(ThermofaceError):
    pass


class WrongRowCount(ThermofaceError):
    pass


class DuplicateIndex(ThermofaceError):
    pass


class IndexOutOfRange(ThermofaceError):
    pass


class NonNumericCoordinate(ThermofaceError):
    pass


class OutOfBounds(ThermofaceError):
    pass


class FrameTooSmall(ThermofaceError):
    pass


# --- tracking ---

class NoFeaturesFound(ThermofaceError):
    pass


class WindowOutOfBounds(ThermofaceError):
    pass


class SingularHessian(ThermofaceError):
    pass


class EmptySequence(ThermofaceError):
    pass


class AllSeedsSingular(ThermofaceError):
    pass


class TooFewCorrespondences(ThermofaceError):
    pass


class DegenerateConfiguration(ThermofaceError):
    pass


class NonPositiveScale(ThermofaceError):
    pass


# --- region extraction ---

class DegeneratePolygon(ThermofaceError):
    pass


class EmptyIntersection(ThermofaceError):
    pass


# --- SPD kernels and matching ---

class NotPositiveDefinite(ThermofaceError):
    pass


class DimMismatch(ThermofaceError):
    pass


class EmptyGallery(ThermofaceError):
    pass


class SingleClass(ThermofaceError):
    pass


class TooFewSubjects(ThermofaceError):
    pass


class DegenerateSpectraWarning(UserWarning):
    """Scatter of the point spectra is all-zero; the covariance is pure ridge."""


# --- embedding ---

class KOutOfRange(ThermofaceError):
    pass


class NoDiscriminantDirections(ThermofaceError):
    pass


class ShapeMismatch(ThermofaceError):
    pass


class EmptyTrainingSet(ThermofaceError):
    pass


class DOutOfRange(ThermofaceError):
    pass


# --- texture descriptor ---

class PatchTooSmall(ThermofaceError):
    pass


class NonFiniteCoefficient(ThermofaceError):
    pass


# --- pipeline ---

class OutputDirNotWritable(ThermofaceError):
    pass


class ManifestInvalid(ThermofaceError):
    pass


class TooManyRecordFailures(ThermofaceError):
    pass
