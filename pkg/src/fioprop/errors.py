"""Exception hierarchy.

``NumericalPrecondition`` groups the failures that signal "the asymptotic
regime was not reached" (threshold time too small, divergent series, state
escaping the box).  The CLI maps these to exit code 3, plain configuration
mistakes to exit code 2, and failed estimate suites to exit code 1.
"""


class FiopropError(Exception):
    """Base class for all package errors."""


class ConfigError(FiopropError):
    """Invalid experiment configuration; message carries the field path."""


class TooFewSamples(FiopropError):
    """Finite-difference stencil does not fit the sample count."""


class InvalidEpsilon(FiopropError):
    """Decay exponent outside (0, 1)."""


class InvalidExponents(FiopropError):
    """Pair-potential exponents must satisfy 0 < epsilon < delta < 1."""


class PhaseGridMismatch(FiopropError):
    """Phase table was built on a different lattice than the kernel grid."""


class NeedsThreeTimeSlices(FiopropError):
    """Finite-difference defect kernel needs E at t - dt, t, t + dt."""


class NumericalPrecondition(FiopropError):
    """A numerical precondition failed (asymptotic regime not reached)."""


class StepSizeUnderflow(NumericalPrecondition):
    """Adaptive integrator step fell below 1e-14 of the time span."""


class NonFiniteState(NumericalPrecondition):
    """Trajectory state overflowed or became NaN."""


class ContractionFailure(NumericalPrecondition):
    """Flow-inversion fixed point is not contracting; threshold time too small."""


class SeriesDiverges(NumericalPrecondition):
    """Geometric series for the defect inverse does not converge."""


class BoundaryLeak(NumericalPrecondition):
    """Evolved state carries more than the allowed mass near the box edge."""


class PicardDiverges(NumericalPrecondition):
    """Volterra iteration increments grew for three consecutive sweeps."""
