# errors.py
"""Exception types shared across the package."""


class LqdynError(Exception):
    """Base class for all package-specific errors."""


class NonFiniteOutput(LqdynError):
    """A right-hand-side evaluation produced NaN or infinity."""


class NonFiniteState(LqdynError):
    """Integration produced a non-finite state.

    Attributes
    ----------
    step_index : int
        Index of the first step at which the state left the finite range.
    partial_times, partial_states : ndarray or None
        The finite portion of the trajectory computed before the failure.
    """

    def __init__(self, message, step_index, partial_times=None,
                 partial_states=None):
        super().__init__(message)
        self.step_index = step_index
        self.partial_times = partial_times
        self.partial_states = partial_states


class TooFewPoints(LqdynError):
    """A trajectory has too few samples for the requested operation."""


class NonUniformGrid(LqdynError):
    """Time samples are not equally spaced."""


class EmptyRange(LqdynError):
    """A sampling interval has lower bound greater than upper bound."""


class DimensionMismatch(LqdynError):
    """Array shapes are inconsistent with each other."""


class EmptyInput(LqdynError):
    """An operation received no data."""


class Underdetermined(LqdynError):
    """A regression has fewer rows than unknowns."""


class NonFinite(LqdynError):
    """A numeric quantity that must be finite is NaN or infinity."""


class Diverged(LqdynError):
    """Training loss became non-finite."""


class MalformedFile(LqdynError):
    """A model file does not match the expected schema."""


class VersionMismatch(LqdynError):
    """A model file was written with an unsupported schema version."""


class GridMismatch(LqdynError):
    """Two trajectories do not share the same time grid."""


class RankTooLarge(LqdynError):
    """A requested basis rank exceeds what the data supports."""
