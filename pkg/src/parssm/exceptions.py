"""Exception types raised across the package."""


class ParssmError(Exception):
    """Base class for all package-specific errors."""


# --- spectral analysis ---

class NonSquare(ParssmError):
    """Input matrix is not square."""


class NoConjugatePair(ParssmError):
    """The requested spectral subspace is not spanned by a conjugate pair."""


class UnstableSpectrum(ParssmError):
    """An operation requiring a strictly stable spectrum received an eigenvalue with Re >= 0."""


class NoBifurcationInRange(ParssmError):
    """The pair real part does not change sign on the sampled parameter interval."""


class NoRootBracket(ParssmError):
    """No sign change brackets the requested resonance on the parameter interval."""


class SignViolation(ParssmError):
    """Sign conditions of the asymptotic resonance formula are violated."""


# --- eigenframes and cohomological equations ---

class DefectiveLinearPart(ParssmError):
    """The eigenvector matrix is numerically singular; the linear part is not usable as semisimple."""


class EigenvalueCollision(ParssmError):
    """Two eigenvalues coincide within tolerance; disjointness is required."""


class ResonantOrder(ParssmError):
    """A cohomological operator is singular at the given order.

    Attributes: order, multi_index, eigen_index, condition (the offending
    diagonal magnitude relative to the eigenvalue).
    """

    def __init__(self, order, multi_index, eigen_index, condition):
        self.order = order
        self.multi_index = tuple(multi_index)
        self.eigen_index = eigen_index
        self.condition = condition
        super().__init__(
            f"resonant cohomological operator at order {order}, multi-index "
            f"{self.multi_index}, eigenvalue index {eigen_index} "
            f"(|L|/|lambda| = {condition:.3e})"
        )


# --- radial normal-form analysis ---

class ResonantCoefficient(ParssmError):
    """A radial Taylor coefficient denominator vanishes (2*k0*mu = sigma)."""

    def __init__(self, k0):
        self.k0 = k0
        super().__init__(f"radial coefficient a_{k0} is singular: 2*{k0}*mu = sigma")


class DomainViolation(ParssmError):
    """Arguments outside the validity domain of the closed-form solution."""


class QuadratureFailure(ParssmError):
    """Adaptive quadrature could not meet the requested tolerance."""


class SeriesNotConverged(ParssmError):
    """The closed-form series tail bound was not met within the term budget."""


# --- trajectory generation ---

class BlowUp(ParssmError):
    """The integrated state left the admissible region (norm above 1e6)."""


class WrongRegime(ParssmError):
    """The data-generation protocol contradicts the sign of the pair real part."""


# --- data-driven pipeline ---

class RankDeficient(ParssmError):
    """Snapshot data is effectively lower-dimensional than the chart."""


class IllConditioned(ParssmError):
    """Regression design condition estimate above threshold (reported, not fatal by default)."""


class TooShort(ParssmError):
    """Not enough snapshots for the requested operation."""


class SubspaceJump(ParssmError):
    """Consecutive chart planes are too far apart to align meaningfully."""


class KeyMismatch(ParssmError):
    """Models to be interpolated do not share monomial key sets."""


class OutOfRange(ParssmError):
    """Query parameter outside the interpolation knot hull."""


class NoSignChange(ParssmError):
    """The leading reduced eigenvalue real part does not change sign on the interval."""


class GridMismatch(ParssmError):
    """Two trajectory datasets do not share the same time grid."""


# --- orchestration ---

class UnknownKind(ParssmError):
    """Unrecognized figure-data kind."""


class StageError(ParssmError):
    """A pipeline stage failed; earlier stages' outputs are left intact."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
