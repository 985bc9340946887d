"""Exception types raised across the pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


# --- session / loading ---

class MissingFile(PipelineError):
    pass


class RateMismatch(PipelineError):
    """Declared sampling rate disagrees with the rate inferred from timestamps."""


class DuplicateChannel(PipelineError):
    pass


class NoEmgChannel(PipelineError):
    pass


# --- dsp ---

class SignalTooShort(PipelineError):
    pass


class NyquistViolation(PipelineError):
    pass


class WindowTooLarge(PipelineError):
    pass


class NonIntegerRatio(PipelineError):
    pass


# --- features ---

class UnalignedLabels(PipelineError):
    pass


class EmptySelection(PipelineError):
    pass


# --- quality ---

class EmptyCalibration(PipelineError):
    pass


class WrongAxisCount(PipelineError):
    pass


class ZeroRestingPower(PipelineError):
    pass


# --- classify ---

class SingularCovariance(PipelineError):
    pass


class ClassTooSmall(PipelineError):
    pass


class SchemaMismatch(PipelineError):
    pass


class NonConvergence(PipelineError):
    pass


class MissingRepetition(PipelineError):
    pass


class CoincidentCentroids(PipelineError):
    pass


# --- stats ---

class TooFewSamples(PipelineError):
    pass


class ZeroVariance(PipelineError):
    pass


class AllZeroDifferences(PipelineError):
    pass


class LengthMismatch(PipelineError):
    pass


class ZeroPooledStd(PipelineError):
    pass


class ParticipantMismatch(PipelineError):
    pass


# --- cli / reporting ---

class MissingResults(PipelineError):
    pass
