"""Exception taxonomy shared by all modules."""


class MagzollError(Exception):
    """Base class for all package errors."""


class ConfigError(MagzollError):
    """Invalid configuration file, key, or value (the offending key is named)."""


class NonPositiveInput(MagzollError):
    """A strictly positive scalar input was zero or negative."""


# geometry ---------------------------------------------------------------

class PoleEvaluation(MagzollError):
    """Chart quantity requested at or beyond a coordinate pole."""


class UnboundedDomain(MagzollError):
    """Global quantity (e.g. area) requested on a non-closed surface."""


# flow -------------------------------------------------------------------

class PoleEscape(MagzollError):
    """Trajectory entered the configured pole margin of a revolution chart."""

    def __init__(self, t, q, margin):
        super().__init__(f"trajectory entered pole margin {margin:g} at t={t:.6g}, q={q}")
        self.t = t
        self.q = q
        self.margin = margin


class StepUnderflow(MagzollError):
    """Adaptive step collapsed below the representable floor (stiffness)."""

    def __init__(self, t, q):
        super().__init__(f"step size underflow at t={t:.6g}, q={q}")
        self.t = t
        self.q = q


# curves -----------------------------------------------------------------

class NonContractible(MagzollError):
    """Capping-disk quantity requested for a loop with nonzero winding."""


class DegenerateSegments(MagzollError):
    """Perturbation failed to resolve exactly-overlapping polyline segments."""


# orbits -----------------------------------------------------------------

class NotRotationallySymmetric(MagzollError):
    """Magnetic function failed the sampled rotational-symmetry test."""


class WindowOverlap(MagzollError):
    """Short-orbit window and long-orbit threshold are not disjoint."""


class InconclusiveScan(MagzollError):
    """Orbit grid scan exhausted the horizon while still converging.

    Carries the partial report so callers can inspect what was sampled.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# variational ------------------------------------------------------------

class Collapse(MagzollError):
    """Descent drove the free period below the collapse threshold."""


class ContinuationLost(MagzollError):
    """Waist continuation escaped its neighborhood or collapsed.

    ``lam_reached`` is the largest coupling value at which a waist was still
    found (an empirical perturbation threshold for the system).
    """

    def __init__(self, message, lam_reached):
        super().__init__(message)
        self.lam_reached = lam_reached


# diagnostics ------------------------------------------------------------

class TorusEulerZero(MagzollError):
    """Helicity is undefined when the Euler characteristic vanishes."""


class NonNegativeEuler(MagzollError):
    """Quantity requires a surface of negative Euler characteristic."""


class ZeroMeanField(MagzollError):
    """Quantity requires a magnetic function with nonzero total integral."""


class NonpositiveMagneticCurvature(MagzollError):
    """Average magnetic curvature must be positive for this quantity."""


class DenominatorNonpositive(MagzollError):
    """A comparison-radius denominator was nonpositive; carries which one."""

    def __init__(self, which):
        super().__init__(f"nonpositive denominator for radius {which}")
        self.which = which


class CrossingNotFound(MagzollError):
    """Axis-crossing event detection failed (e.g. field sign change)."""
