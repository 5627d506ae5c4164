"""Spectral analysis of parameter-dependent linearizations.

Covers eigenvalue extraction with a marked two-dimensional spectral subspace,
the spectral quotient, nonresonance checking against integer combinations of
the subspace pair, and localization of the resonances that accumulate on the
stable side of a Hopf bifurcation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    NoBifurcationInRange,
    NoConjugatePair,
    NonSquare,
    NoRootBracket,
    SignViolation,
    UnstableSpectrum,
)

__all__ = [
    "Spectrum",
    "EigenCurves",
    "ResonanceReport",
    "ResonanceScan",
    "ResonanceViolation",
    "compute_spectrum",
    "spectral_quotient",
    "check_nonresonance",
    "locate_resonances",
    "asymptotic_resonance_estimate",
]

_PAIR_RTOL = 1e-9    # conjugate-pair verification
_REAL_ATOL = 1e-9    # |Im| below this (relative) counts as a real eigenvalue


def _is_real(lam):
    return abs(lam.imag) <= _REAL_ATOL * max(1.0, abs(lam))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by nonincreasing real part, with the 2D subspace marked.

    ``subspace_indices`` selects exactly one complex-conjugate pair; the member
    with positive imaginary part comes first.
    """

    eigenvalues: np.ndarray
    subspace_indices: tuple

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=complex)
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "subspace_indices", tuple(int(i) for i in self.subspace_indices))
        self.validate()

    def validate(self):
        vals = self.eigenvalues
        if np.any(np.diff(vals.real) > 1e-12 * np.maximum(1.0, np.abs(vals[:-1]))):
            raise NoConjugatePair("eigenvalues are not sorted by nonincreasing real part")
        i, j = self.subspace_indices
        li, lj = vals[i], vals[j]
        if _is_real(li) or _is_real(lj):
            raise NoConjugatePair(f"subspace eigenvalues {li}, {lj} are not a complex pair")
        if abs(li - np.conj(lj)) > _PAIR_RTOL * max(1.0, abs(li)):
            raise NoConjugatePair(f"subspace eigenvalues {li}, {lj} are not conjugates")
        # every nonreal eigenvalue must have a conjugate partner
        nonreal = [v for v in vals if not _is_real(v)]
        for v in nonreal:
            if not any(abs(v - np.conj(w)) <= _PAIR_RTOL * max(1.0, abs(v)) for w in nonreal):
                raise NoConjugatePair(f"eigenvalue {v} lacks a conjugate partner")

    @property
    def pair(self):
        """The subspace pair, positive-imaginary member first."""
        i, j = self.subspace_indices
        li, lj = self.eigenvalues[i], self.eigenvalues[j]
        return (li, lj) if li.imag > 0 else (lj, li)

    @property
    def alpha(self):
        return self.pair[0].real

    @property
    def omega(self):
        return self.pair[0].imag

    def outside(self):
        """(index, eigenvalue) for everything outside the subspace."""
        i, j = self.subspace_indices
        return [(l, v) for l, v in enumerate(self.eigenvalues) if l not in (i, j)]

    def nu(self):
        """Largest purely real eigenvalue outside the subspace."""
        reals = [v.real for _, v in self.outside() if _is_real(v)]
        if not reals:
            raise NoConjugatePair("no purely real eigenvalue outside the subspace")
        return max(reals)


def _sort_eigenvalues(vals):
    order = np.lexsort((-vals.imag, -vals.real))
    return vals[order], order


def compute_spectrum(A, subspace_rule="leading-pair"):
    """Eigen-decompose a real square matrix and mark the 2D spectral subspace.

    subspace_rule is "leading-pair" (the two eigenvalues of largest real part,
    which must be conjugates) or an explicit pair of indices into the sorted
    spectrum.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {A.shape}")
    vals = np.linalg.eigvals(A)
    vals, _ = _sort_eigenvalues(vals)
    if subspace_rule == "leading-pair":
        if len(vals) < 2 or _is_real(vals[0]):
            raise NoConjugatePair("leading eigenvalue is real; no leading conjugate pair")
        idx = (0, 1)
    else:
        idx = tuple(int(i) for i in subspace_rule)
        if len(idx) != 2:
            raise NoConjugatePair("explicit subspace rule must select two indices")
    return Spectrum(vals, idx)


def spectral_quotient(s):
    """floor(Re lambda_N / Re lambda_1) + 1 for a strictly stable spectrum."""
    re = s.eigenvalues.real
    if np.any(re >= 0):
        raise UnstableSpectrum("spectral quotient requires all real parts < 0")
    return int(np.floor(re[-1] / re[0])) + 1


@dataclass(frozen=True)
class ResonanceViolation:
    m1: int
    m2: int
    eigen_index: int


def check_nonresonance(s, max_order, tol=1e-6, warn_tol=1e-3):
    """All (m1, m2, l) with lambda_l ~ m1*lambda_1 + m2*lambda_2 up to max_order.

    lambda_1 is the positive-imaginary member of the subspace pair. Equality is
    tested relative to |lambda_l| at tolerance ``tol``; combinations within
    ``warn_tol`` but outside ``tol`` trigger a near-resonance warning, since
    coefficient denominators degrade continuously.
    """
    if max_order < 2:
        raise ValueError("max_order must be at least 2")
    if tol <= 0:
        raise ValueError("tol must be positive")
    l1, l2 = s.pair
    violations = []
    for order in range(2, max_order + 1):
        for m1 in range(order, -1, -1):
            m2 = order - m1
            combo = m1 * l1 + m2 * l2
            for l, lam in s.outside():
                gap = abs(lam - combo)
                scale = max(abs(lam), 1e-300)
                if gap <= tol * scale:
                    violations.append(ResonanceViolation(m1, m2, l))
                elif gap <= warn_tol * scale:
                    warnings.warn(
                        f"near-resonance: |lambda_{l} - ({m1},{m2})-combination| "
                        f"= {gap:.3e} ({gap / scale:.2e} relative)",
                        stacklevel=2,
                    )
    return violations


class EigenCurves:
    """Eigenvalue curves mu -> Spectrum over an interval, with a sampling grid.

    Consecutive grid samples are matched by nearest-eigenvalue pairing; the
    constructor refines the grid (interval halving) where the matching is
    ambiguous relative to the local eigenvalue gap.
    """

    def __init__(self, spectrum_fn, grid, diagnostics=None):
        self.spectrum_fn = spectrum_fn
        self.grid = np.asarray(grid, dtype=float)
        if self.grid.ndim != 1 or len(self.grid) < 3:
            raise ValueError("grid must be a 1D array with at least 3 samples")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        self.diagnostics = list(diagnostics or [])

    # -- constructors --

    @classmethod
    def from_matrix_family(cls, matrix_fn, mu_min, mu_max, num=201,
                           subspace_rule="leading-pair", max_refine=6):
        """Sample spectra of matrix_fn(mu), refining where tracking is ambiguous."""
        grid = list(np.linspace(mu_min, mu_max, num))
        fn = lambda mu: compute_spectrum(matrix_fn(mu), subspace_rule)
        diagnostics = []
        spectra = {mu: fn(mu) for mu in grid}
        for _ in range(max_refine):
            inserts = []
            for a, b in zip(grid[:-1], grid[1:]):
                if not cls._match_ok(spectra[a].eigenvalues, spectra[b].eigenvalues):
                    inserts.append(0.5 * (a + b))
            if not inserts:
                break
            for mu in inserts:
                spectra[mu] = fn(mu)
            grid = sorted(set(grid) | set(inserts))
        else:
            diagnostics.append("eigenvalue tracking still ambiguous after maximum grid refinement")
        return cls(fn, np.array(grid), diagnostics)

    @classmethod
    def from_samples(cls, mu, alpha, omega, nu):
        """Tabulated curves (e.g. from CSV); columns are interpolated cubically."""
        from scipy.interpolate import CubicSpline

        mu = np.asarray(mu, dtype=float)
        a_s = CubicSpline(mu, np.asarray(alpha, dtype=float))
        w_s = CubicSpline(mu, np.asarray(omega, dtype=float))
        n_s = CubicSpline(mu, np.asarray(nu, dtype=float))
        return cls.from_scalar_curves(
            lambda m: float(a_s(m)), lambda m: float(w_s(m)), lambda m: float(n_s(m)),
            mu[0], mu[-1], num=len(mu), grid=mu,
        )

    @classmethod
    def from_scalar_curves(cls, alpha_fn, omega_fn, nu_fn, mu_min, mu_max, num=401, grid=None):
        """Synthetic 3D curves from callables for the pair real/imaginary parts and nu."""
        def fn(mu):
            a, w, n = alpha_fn(mu), omega_fn(mu), nu_fn(mu)
            vals = np.array([a + 1j * w, a - 1j * w, n + 0j])
            vals, order = _sort_eigenvalues(vals)
            pair = tuple(int(np.where(order == k)[0][0]) for k in (0, 1))
            return Spectrum(vals, pair)
        return cls(fn, np.linspace(mu_min, mu_max, num) if grid is None else grid)

    @staticmethod
    def _match_ok(vals_a, vals_b):
        # nearest-neighbour assignment must be unambiguous: the largest match
        # distance has to stay below half the smallest gap between distinct
        # eigenvalues at the left sample.
        d = np.abs(vals_a[:, None] - vals_b[None, :])
        match = d.min(axis=1).max()
        n = len(vals_a)
        gaps = [abs(vals_a[i] - vals_a[j]) for i in range(n) for j in range(i + 1, n)]
        gaps = [g for g in gaps if g > 1e-12]
        if not gaps:
            return True
        return match <= 0.5 * min(gaps)

    # -- scalar accessors --

    def spectrum(self, mu):
        return self.spectrum_fn(float(mu))

    def alpha(self, mu):
        return self.spectrum(mu).alpha

    def omega(self, mu):
        return self.spectrum(mu).omega

    def nu(self, mu):
        return self.spectrum(mu).nu()

    def mu0(self, tol=1e-12):
        """Bifurcation value: the zero of alpha on the grid, by bisection."""
        a = np.array([self.alpha(m) for m in self.grid])
        sign_change = np.nonzero(a[:-1] * a[1:] <= 0)[0]
        if len(sign_change) == 0:
            raise NoBifurcationInRange("pair real part does not change sign on the interval")
        i = sign_change[0]
        return _bisect(self.alpha, self.grid[i], self.grid[i + 1], tol)


def _bisect(g, lo, hi, tol, max_iter=200):
    """Bisection to |g| <= tol (with interval width as a secondary stop)."""
    glo = g(lo)
    ghi = g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0:
        raise NoRootBracket(f"no sign change on [{lo}, {hi}]")
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= tol and (hi - lo) <= max(tol, 4e-16 * max(abs(lo), abs(hi), 1.0)):
            return mid
        if glo * gm <= 0:
            hi = mid
        else:
            lo, glo = mid, gm
    return mid


@dataclass(frozen=True)
class ResonanceReport:
    """One located resonance nu(mu) = order * alpha(mu)."""

    order: int                  # 2m
    location: float             # mu_{2m}
    residual: float             # |nu - order*alpha| at the root
    asymptotic_estimate: float  # mu0 - (nu0/(2am))^(1/p)


@dataclass
class ResonanceScan:
    """Sequence of resonance reports plus per-m diagnostics and fitted expansion data."""

    reports: list
    skipped: list = field(default_factory=list)   # (m, reason) for omitted orders
    mu0: float = float("nan")
    expansion: tuple = (1, float("nan"), float("nan"))  # (p, a, nu0) estimates

    def __iter__(self):
        return iter(self.reports)

    def __len__(self):
        return len(self.reports)

    def __getitem__(self, i):
        return self.reports[i]


def asymptotic_resonance_estimate(nu0, a, p, mu0, m):
    """Leading-order resonance location mu0 - (nu0 / (2 a m))**(1/p)."""
    if nu0 >= 0 or a >= 0:
        raise SignViolation(f"need nu0 < 0 and a < 0, got nu0={nu0}, a={a}")
    if p < 1 or m < 1:
        raise SignViolation(f"need p >= 1 and m >= 1, got p={p}, m={m}")
    return mu0 - (nu0 / (2.0 * a * m)) ** (1.0 / p)


def _fit_expansion(curves, mu0):
    """Estimate (p, a, nu0) from the pre-bifurcation samples.

    alpha(mu) ~ a (mu0 - mu)^p is fitted by log-log regression over the last
    decade of grid offsets before mu0; p is rounded to the nearest integer and
    a refitted with p held fixed. nu0 is nu evaluated at mu0.
    """
    pre = curves.grid[curves.grid < mu0 - 1e-14]
    x = mu0 - pre
    if len(x) < 4:
        raise NoBifurcationInRange("too few pre-bifurcation samples to fit the expansion")
    d = x.min()
    sel = (x >= d) & (x <= 10 * d)
    if sel.sum() < 4:
        sel = np.argsort(x)[: max(4, len(x) // 10)]
    xs = x[sel]
    ys = np.array([-curves.alpha(m) for m in pre[sel]])
    if np.any(ys <= 0):
        raise NoBifurcationInRange("alpha is not negative on the pre-bifurcation side")
    slope, intercept = np.polyfit(np.log(xs), np.log(ys), 1)
    p = max(1, int(round(slope)))
    a = -float(np.exp(np.mean(np.log(ys) - p * np.log(xs))))
    nu0 = curves.nu(mu0)
    return p, a, nu0


def locate_resonances(curves, m_range, root_tol=1e-10):
    """Find every root of nu(mu) - 2m*alpha(mu) on the curve interval.

    For each m the grid is scanned for sign changes, each bracket refined by
    bisection to ``root_tol``, and the asymptotic estimate filled in from the
    fitted local expansion of the curves. Orders without a bracket are skipped
    and recorded in the scan diagnostics.
    """
    mu0 = curves.mu0()
    nu_grid = np.array([curves.nu(m) for m in curves.grid])
    if np.any(nu_grid >= 0):
        raise SignViolation("nu(mu) must be negative throughout the interval")
    p, a, nu0 = _fit_expansion(curves, mu0)
    alpha_grid = np.array([curves.alpha(m) for m in curves.grid])

    reports, skipped = [], []
    for m in sorted(set(int(m) for m in m_range)):
        if m < 1:
            raise ValueError("resonance multipliers m must be positive")
        g = lambda mu, m=m: curves.nu(mu) - 2 * m * curves.alpha(mu)
        gv = nu_grid - 2 * m * alpha_grid
        brackets = np.nonzero(gv[:-1] * gv[1:] <= 0)[0]
        brackets = [i for i in brackets if not (gv[i] == 0 and i > 0 and gv[i - 1] * gv[i] <= 0)]
        if len(brackets) == 0:
            skipped.append((m, "no sign change of nu - 2m*alpha on the interval"))
            continue
        est = asymptotic_resonance_estimate(nu0, a, p, mu0, m)
        for i in brackets:
            root = _bisect(g, curves.grid[i], curves.grid[i + 1], root_tol)
            reports.append(ResonanceReport(
                order=2 * m,
                location=float(root),
                residual=abs(g(root)),
                asymptotic_estimate=float(est),
            ))
    reports.sort(key=lambda r: (r.order, r.location))
    return ResonanceScan(reports, skipped, mu0, (p, a, nu0))
