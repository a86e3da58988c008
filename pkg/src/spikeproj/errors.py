"""Exception taxonomy.

Every error raised by this package derives from :class:`SpikeProjError`,
so callers can catch the whole family with one clause. Names describe the
failed precondition, not the module that noticed it.
"""

from __future__ import annotations


class SpikeProjError(Exception):
    """Base class for all package errors."""


class DegenerateSpikes(SpikeProjError):
    """Spike values collide with each other or sit inside the bulk atom range."""


class DimensionError(SpikeProjError):
    """Array shapes or counts are inconsistent (e.g. p < M + 1)."""


class SingularityError(SpikeProjError):
    """Evaluation point coincides with an atom of the population law."""


class TailConditionError(SpikeProjError):
    """Entry distribution lacks the moment control the asymptotics require."""


class InvalidBasis(SpikeProjError):
    """Matrix expected to have orthonormal columns does not."""


class InsideSupportError(SpikeProjError):
    """Transform requested at a point inside the bulk spectral support."""


class BranchError(SpikeProjError):
    """Root search could not isolate a unique branch of the inverse transform."""


class NoBulkError(SpikeProjError):
    """Too few non-clustered eigenvalues remain to form an empirical transform."""


class DivergentEstimate(SpikeProjError):
    """Spike estimate blew up (empirical transform at or across a pole)."""


class SymmetryError(SpikeProjError):
    """Matrix expected symmetric is not, beyond numerical tolerance."""


class InternalError(SpikeProjError):
    """Bookkeeping invariant broke; indicates a bug, not bad input."""


class InvalidVector(SpikeProjError):
    """Vector expected to be unit-norm (or of matching length) is not."""


class SpikeNotDetectable(SpikeProjError):
    """Spike sits below the phase-transition threshold for this aspect ratio."""


class VarianceError(SpikeProjError):
    """Test variance is non-positive or undefined at the plug-in estimate."""


class IoError(SpikeProjError):
    """Filesystem output could not be written."""


class ConfigError(SpikeProjError):
    """Experiment configuration file is malformed; message carries line/key."""
