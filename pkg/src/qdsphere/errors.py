"""Exception types raised across the toolkit.

Every failure mode that callers are expected to handle has its own class;
generic programming errors stay as plain ValueError/TypeError.
"""


class QDError(Exception):
    """Base class for all toolkit errors."""


# --- differential construction -------------------------------------------

class EmptyPolynomial(QDError):
    pass


class ZeroDifferential(QDError):
    pass


class UnreducibleWithinTolerance(QDError):
    """Numerator and denominator have roots too close to distinguish a
    common factor from a near-collision; cancelling would be a guess."""


class RootFindingFailure(QDError):
    pass


class NotDoublePole(QDError):
    pass


class NotFiniteCritical(QDError):
    pass


# --- tracing ---------------------------------------------------------------

class SeedAtCriticalPoint(QDError):
    pass


class StepSizeUnderflow(QDError):
    pass


class BranchContinuationFailure(QDError):
    pass


# --- graph assembly ---------------------------------------------------------

class GluingAmbiguity(QDError):
    pass


class NoFiniteCritical(QDError):
    """The critical graph is empty; the differential is one of the
    closed-form degenerate cases and has no graph pipeline."""


class ChaoticInput(QDError):
    pass


class ProbeInconsistency(QDError):
    pass


# --- classification ----------------------------------------------------------

class TooLarge(QDError):
    pass


class InconsistentCocycle(QDError):
    pass


class IndeterminateInfinity(QDError):
    """Arithmetic of the form inf - inf was requested."""


class NonPlanarInput(QDError):
    pass


# --- measures ---------------------------------------------------------------

class NotGradientOrientation(QDError):
    pass


class InfiniteDensityEdge(QDError):
    """A nonzero density coefficient landed on an edge of infinite
    canonical length; the measure is not finite and is not built."""


class ContourTouchesSupport(QDError):
    pass


class PointTooCloseToSupport(QDError):
    pass


class DegreeMismatch(QDError):
    pass


class NotStrebelForm(QDError):
    pass


# --- polynomial ODE solving ---------------------------------------------------

class NoConvergence(QDError):
    pass


class RootCollision(QDError):
    pass


class BudgetExhausted(QDError):
    pass


class NonConvergingChain(QDError):
    pass
