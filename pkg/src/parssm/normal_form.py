"""Exact treatment of the radial graph equation of the 3D cubic Hopf model.

The transverse graph z = h(rho), rho = x^2 + y^2, satisfies

    sigma h(rho) + rho = 2 h'(rho) (mu rho - rho^2),

solved here three ways: the Taylor recursion, an integrating-factor closed
form evaluated by quadrature, and the binomial series of the particular
solution (including the logarithmic resonant term when sigma/(2 mu) is a
positive integer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .exceptions import (
    DomainViolation,
    QuadratureFailure,
    ResonantCoefficient,
    SeriesNotConverged,
)

__all__ = [
    "HopfParams",
    "RadialSeries",
    "RegularityClass",
    "taylor_coefficients",
    "exact_solution",
    "particular_solution_series",
    "classify_regularity",
    "select_analytic_branch",
    "ode_residual",
    "radial_flow",
    "cross_section",
]

_INT_RTOL = 1e-12    # denominator/integer detection
_QUAD_ABS_TOL = 1e-10
_QUAD_LIMIT = 60


@dataclass(frozen=True)
class HopfParams:
    """Bifurcation parameter mu, rotation frequency omega != 0, transverse rate sigma < 0."""

    mu: float
    omega: float
    sigma: float

    def __post_init__(self):
        if self.sigma >= 0:
            raise DomainViolation(f"sigma must be negative, got {self.sigma}")
        if self.omega == 0:
            raise DomainViolation("omega must be nonzero")

    @property
    def alpha(self):
        """sigma / (2 mu), the ratio controlling regularity."""
        if self.mu == 0:
            raise DomainViolation("alpha is undefined at mu = 0")
        return self.sigma / (2.0 * self.mu)


def _resonant_k(p):
    """The positive integer k0 with 2 k0 mu = sigma, or None."""
    if p.mu == 0:
        return None
    a = p.alpha
    k0 = round(a)
    if k0 >= 1 and abs(a - k0) <= _INT_RTOL * max(1.0, abs(a)):
        return int(k0)
    return None


@dataclass(frozen=True)
class RadialSeries:
    """Taylor coefficients a_1..a_K of the radial graph series sum a_k rho^k."""

    coefficients: np.ndarray
    params: HopfParams

    @property
    def alpha(self):
        return self.params.alpha

    def radius_estimate(self):
        """Successive-ratio estimate |a_K / a_{K+1}| of the convergence radius.

        Requires one extra coefficient; computed from the stored recursion, so
        the K used is len(coefficients) - 1.
        """
        a = self.coefficients
        if len(a) < 2:
            raise ValueError("need at least two coefficients for a ratio estimate")
        return abs(a[-2] / a[-1])

    def evaluate(self, rho, tail_tol=None):
        """Partial sum sum_k a_k rho^k; optionally enforce a last-term tail bound."""
        a = self.coefficients
        powers = rho ** np.arange(1, len(a) + 1)
        terms = a * powers
        if tail_tol is not None and abs(terms[-1]) >= tail_tol:
            raise SeriesNotConverged(
                f"last term {abs(terms[-1]):.3e} above tail bound {tail_tol:.1e}")
        return float(np.sum(terms))


def taylor_coefficients(p, K):
    """a_1 = 1/(2 mu - sigma), a_k = 2(k-1)/(2 k mu - sigma) a_{k-1}.

    Raises ResonantCoefficient(k0) when a denominator vanishes to relative
    tolerance 1e-12, which happens exactly at alpha = k0 in Z+.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    coeffs = np.empty(K)
    prev = None
    for k in range(1, K + 1):
        den = 2.0 * k * p.mu - p.sigma
        if abs(den) <= _INT_RTOL * max(abs(2.0 * k * p.mu), abs(p.sigma), 1.0):
            raise ResonantCoefficient(k)
        prev = 1.0 / den if k == 1 else 2.0 * (k - 1) / den * prev
        coeffs[k - 1] = prev
    return RadialSeries(coeffs, p)


def _check_domain(p, *rhos):
    if p.mu == 0:
        raise DomainViolation("mu must be nonzero")
    for rho in rhos:
        if rho <= 0:
            raise DomainViolation(f"rho must be positive, got {rho}")
        if p.mu > 0 and rho >= p.mu:
            raise DomainViolation(f"for mu > 0 need rho < mu, got rho={rho}, mu={p.mu}")


def _log_M(p, rho):
    # M(rho) = ((|mu| - sign(mu) rho)/rho)^alpha, evaluated in log space
    return p.alpha * (math.log(abs(p.mu) - math.copysign(1.0, p.mu) * rho) - math.log(rho))


def exact_solution(p, h_at_rho0, rho0, rho):
    """Integrating-factor solution through (rho0, h(rho0)).

    h(rho) = M(rho)^-1 M(rho0) h0 - M(rho)^-1 int_{rho0}^{rho} M(s)/(2(s-mu)) ds
    with the integral taken by adaptive quadrature (absolute tolerance 1e-10)
    after the substitution s = e^t, which regularizes the power-law behaviour
    of the integrand at small rho.
    """
    _check_domain(p, rho0, rho)
    if rho == rho0:
        return float(h_at_rho0)

    def integrand(t):
        s = math.exp(t)
        return math.exp(_log_M(p, s)) * s / (2.0 * (s - p.mu))

    value, abserr, info, *tail = quad(
        integrand, math.log(rho0), math.log(rho),
        epsabs=_QUAD_ABS_TOL, epsrel=1e-12, limit=_QUAD_LIMIT, full_output=True,
    )
    if tail and abserr > 10.0 * max(_QUAD_ABS_TOL, 1e-12 * abs(value)):
        raise QuadratureFailure(f"quadrature did not converge: {tail[0]} (abserr {abserr:.2e})")
    log_m = _log_M(p, rho)
    return math.exp(_log_M(p, rho0) - log_m) * h_at_rho0 - math.exp(-log_m) * value


def _binomial_stream(beta):
    """Yields binom(beta, k) for k = 0, 1, 2, ..."""
    b = 1.0
    k = 0
    while True:
        yield b
        b *= (beta - k) / (k + 1)
        k += 1


def particular_solution_series(p, rho0, rho, n_terms=None, tail_tol=1e-10):
    """Closed-form particular solution h_p by the binomial series.

    Pre-bifurcation (mu < 0) this includes the log(rho/rho0) term exactly when
    alpha is a positive integer, in which case the series is finite. The
    binomial expansion converges only for rho, rho0 < |mu|. The last retained
    term must fall below ``tail_tol``, otherwise SeriesNotConverged.
    """
    _check_domain(p, rho0, rho)
    if p.mu < 0 and max(rho, rho0) >= abs(p.mu):
        raise DomainViolation("series requires rho, rho0 < |mu| for mu < 0")
    a = p.alpha
    am = abs(p.mu)
    k0 = _resonant_k(p)
    budget = n_terms if n_terms is not None else 100_000
    total = 0.0
    last = np.inf
    stream = _binomial_stream(a - 1.0)
    for k in range(budget):
        binom = next(stream)
        if p.mu < 0 and k0 is not None and k == k0 - 1:
            last = 0.0
            continue
        sign = (-1.0) ** k if p.mu > 0 else 1.0
        expo = k - a + 1.0
        term = binom * sign * am ** (a - 1.0 - k) / expo * (rho ** expo - rho0 ** expo)
        total += term
        last = abs(term)
        if k0 is not None and p.mu < 0 and k >= k0:
            # integer alpha: binomial coefficients vanish beyond k = alpha - 1
            if binom == 0.0:
                last = 0.0
                break
        if n_terms is None and k > 4 and last < 0.1 * tail_tol:
            break
    if not last < tail_tol:
        raise SeriesNotConverged(f"last term {last:.3e} above tail bound {tail_tol:.1e}")
    if p.mu < 0:
        log_term = math.log(rho / rho0) if k0 is not None else 0.0
        return -0.5 * (rho / (rho + am)) ** a * (total + log_term)
    return 0.5 * (rho / (p.mu - rho)) ** a * total


@dataclass(frozen=True)
class RegularityClass:
    """Smoothness classification of the invariant-graph branches at the origin.

    ``kind`` is "analytic", "hoelder" (fractional branches of finite Hoelder
    class; the primary branch is still analytic), or "log_resonant" (alpha a
    positive integer, rho^k0 log rho terms). Exponent None in a smoothness
    tuple stands for "any delta < 1".
    """

    kind: str
    alpha: float
    analytic_branch: bool
    smoothness_rho: tuple
    in_xy_coordinates: tuple
    k0: int = None
    boundary_case: bool = False


def classify_regularity(p):
    """Regularity of the graph branches as a function of alpha = sigma/(2 mu)."""
    if p.mu == 0:
        raise DomainViolation("classification is undefined at mu = 0")
    a = p.alpha
    if p.mu > 0:
        return RegularityClass("analytic", a, True, (math.inf, 0.0), (math.inf, 0.0))
    k0 = _resonant_k(p)
    if k0 is not None:
        return RegularityClass(
            "log_resonant", a, False,
            smoothness_rho=(k0 - 1, None),
            in_xy_coordinates=(2 * k0 - 1, None),
            k0=k0,
        )
    frac_rho = a - math.floor(a)
    frac_xy = 2 * a - math.floor(2 * a)
    boundary = abs(frac_xy) <= 1e-12 or abs(frac_xy - 1.0) <= 1e-12
    if boundary:
        frac_xy = 0.0
    return RegularityClass(
        "hoelder", a, True,
        smoothness_rho=(int(math.floor(a)), frac_rho),
        in_xy_coordinates=(int(math.floor(2 * a + 1e-12)), frac_xy),
        boundary_case=boundary,
    )


def select_analytic_branch(p, rho0, tail_tol=1e-12, max_terms=100_000):
    """Value of the convergent Taylor series at rho0, pinning the analytic branch.

    Requires alpha outside Z+ (ResonantCoefficient otherwise) and rho0 inside
    the convergence disc |mu|.
    """
    if rho0 == 0:
        return 0.0
    _check_domain(p, rho0)
    if rho0 >= abs(p.mu):
        raise DomainViolation(f"rho0 = {rho0} outside the convergence radius |mu| = {abs(p.mu)}")
    total = 0.0
    a_prev = None
    for k in range(1, max_terms + 1):
        den = 2.0 * k * p.mu - p.sigma
        if abs(den) <= _INT_RTOL * max(abs(2.0 * k * p.mu), abs(p.sigma), 1.0):
            raise ResonantCoefficient(k)
        a_prev = 1.0 / den if k == 1 else 2.0 * (k - 1) / den * a_prev
        term = a_prev * rho0 ** k
        total += term
        if k > 4 and abs(term) < tail_tol:
            return total
    raise SeriesNotConverged(f"series tail above {tail_tol:.1e} after {max_terms} terms")


def ode_residual(p, rho, h_value, h_derivative):
    """sigma h + rho - 2 h'(rho) (mu rho - rho^2); zero on exact solutions."""
    return p.sigma * h_value + rho - 2.0 * h_derivative * (p.mu * rho - rho ** 2)


def radial_flow(mu, rho0, t):
    """Closed-form solution of rhodot = 2 mu rho - 2 rho^2 (logistic in rho)."""
    t = np.asarray(t, dtype=float)
    if rho0 == 0:
        return np.zeros_like(t)
    if mu == 0:
        return rho0 / (1.0 + 2.0 * rho0 * t)
    return mu * rho0 / (rho0 + (mu - rho0) * np.exp(-2.0 * mu * t))


def cross_section(p, branch_values, rho0, x_grid):
    """y = 0 section data: z = h(x^2) for each branch seed h(rho0).

    Returns (x_grid, {label: z-array}); includes the analytic branch whenever
    alpha is not a positive integer. At x = 0 all branches attach to the
    origin, so z = 0 there by continuity.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    series = None
    if _resonant_k(p) is None:
        series = taylor_coefficients(p, 200)

    def branch_curve(h0):
        z = np.empty_like(x_grid)
        for i, x in enumerate(x_grid):
            rho = x * x
            z[i] = 0.0 if rho == 0 else exact_solution(p, h0, rho0, rho)
        return z

    curves = {}
    for h0 in branch_values:
        curves[f"h0={h0:g}"] = branch_curve(float(h0))
    if series is not None:
        h0 = series.evaluate(rho0)
        curves["analytic"] = branch_curve(h0)
    return x_grid, curves
