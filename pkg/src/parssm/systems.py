"""Test-system construction and trajectory generation.

Provides the 3D cubic Hopf model as a polynomial field, a high-dimensional
surrogate with a prescribed parameter-dependent spectrum crossing at mu0, a
uniform-grid adaptive integrator, and the pre-/post-bifurcation data
protocols used by the data-driven pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import BlowUp, ParssmError, WrongRegime
from .polynomials import PolyVectorField, evaluate_expression
from .spectra import EigenCurves

__all__ = [
    "TrajectoryDataset",
    "SurrogateSystem",
    "SystemSpec",
    "hopf_normal_form",
    "integrate",
    "generate_training_data",
    "linearize",
    "load_system",
]

_BLOWUP_NORM = 1e6


@dataclass
class TrajectoryDataset:
    """Uniformly sampled snapshots at one parameter value, centered on the fixed point."""

    mu: float
    dt: float
    times: np.ndarray
    states: np.ndarray          # (m, N), fixed point subtracted
    fixed_point: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.fixed_point = np.asarray(self.fixed_point, dtype=float)
        if len(self.times) != len(self.states):
            raise ParssmError("times and states lengths differ")
        if len(self.times) >= 2:
            steps = np.diff(self.times)
            if not np.allclose(steps, self.dt, rtol=1e-9, atol=1e-12):
                raise ParssmError("time grid is not uniform at the stated dt")
        if not np.all(np.isfinite(self.states)):
            raise ParssmError("non-finite entries in snapshot matrix")

    def __len__(self):
        return len(self.times)

    @property
    def dimension(self):
        return self.states.shape[1]

    def to_csv(self, path):
        """Write `t,x1,...,xN` rows; metadata goes into `# key=value` comments."""
        path = Path(path)
        meta = {"mu": self.mu, "dt": self.dt}
        meta.update({k: v for k, v in self.provenance.items()
                     if isinstance(v, (int, float, str))})
        header = "".join(f"# {k}={v}\n" for k, v in meta.items())
        header += "t," + ",".join(f"x{i+1}" for i in range(self.dimension))
        data = np.column_stack([self.times, self.states + self.fixed_point])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            np.savetxt(fh, data, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, mu=None, fixed_point=None):
        path = Path(path)
        meta = {}
        data_lines = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    meta[key.strip()] = value.strip()
                elif line[0].isdigit() or line[0] in "+-.":
                    data_lines.append(line)
        raw = np.atleast_2d(np.loadtxt(data_lines, delimiter=","))
        times, states = raw[:, 0], raw[:, 1:]
        if mu is None:
            if "mu" not in meta:
                raise ParssmError("mu not given and not recorded in the CSV header")
            mu = float(meta["mu"])
        dt = float(meta.get("dt", times[1] - times[0] if len(times) > 1 else 0.0))
        fp = np.zeros(states.shape[1]) if fixed_point is None else np.asarray(fixed_point, float)
        return cls(mu, dt, times, states - fp, fp, provenance=dict(meta))


def hopf_normal_form(mu, omega=1.0, sigma=-5.0):
    """The 3D cubic model: planar Hopf normal form plus a driven stable direction."""
    terms = [
        (0, (1, 0, 0), mu), (0, (0, 1, 0), -omega), (0, (3, 0, 0), -1.0), (0, (1, 2, 0), -1.0),
        (1, (1, 0, 0), omega), (1, (0, 1, 0), mu), (1, (2, 1, 0), -1.0), (1, (0, 3, 0), -1.0),
        (2, (0, 0, 1), sigma), (2, (2, 0, 0), 1.0), (2, (0, 2, 0), 1.0),
    ]
    return PolyVectorField.from_terms(3, terms)


class SurrogateSystem:
    """High-dimensional stand-in with a prescribed spectrum crossing at mu0.

    In hidden modal coordinates the pair plane carries a supercritical Hopf
    nonlinearity (cubic plus a quintic correction), every stable mode is driven
    by the pair amplitude through seeded quadratic and cubic couplings, and a
    fixed random orthogonal matrix mixes all coordinates. The construction is
    deterministic given the seed, and the linearization has exactly the
    prescribed eigenvalues for every mu.
    """

    def __init__(self, dimension=64, seed=0, mu0=8015.0, omega0=2.83,
                 alpha_slope=5e-4, omega_slope=1e-4, nu=-0.2, quintic=0.8):
        if dimension < 6 or dimension % 2:
            raise ParssmError("surrogate dimension must be even and at least 6")
        self.dimension = int(dimension)
        self.seed = int(seed)
        self.mu0 = float(mu0)
        self.omega0 = float(omega0)
        self.alpha_slope = float(alpha_slope)
        self.omega_slope = float(omega_slope)
        self.nu = float(nu)
        self.quintic = float(quintic)

        n = self.dimension
        rng = np.random.default_rng(self.seed)
        gauss = rng.standard_normal((n, n))
        q, r = np.linalg.qr(gauss)
        self.mixing = q * np.sign(np.diag(r))
        scale = 1.0 / np.sqrt(n - 2)
        self.quad_coupling = rng.standard_normal(n - 2) * scale
        self.cubic_coupling = rng.standard_normal(n - 2) * scale

        # fixed stable block: two reals, then rotation-scaling pairs
        n_pairs = (n - 4) // 2
        self.stable_reals = np.array([self.nu, self.nu - 0.08])
        self.stable_pairs = np.column_stack([
            np.linspace(self.nu - 0.16, -2.4, n_pairs),
            np.linspace(0.7, 6.5, n_pairs),
        ])
        B = np.zeros((n - 2, n - 2))
        B[0, 0], B[1, 1] = self.stable_reals
        for i, (a, b) in enumerate(self.stable_pairs):
            B[2 + 2 * i: 4 + 2 * i, 2 + 2 * i: 4 + 2 * i] = [[a, -b], [b, a]]
        self.stable_block = B

    # -- prescribed curves --

    def alpha(self, mu):
        return self.alpha_slope * (mu - self.mu0)

    def omega(self, mu):
        return self.omega0 + self.omega_slope * (mu - self.mu0)

    def eigenvalues(self, mu):
        vals = [self.alpha(mu) + 1j * self.omega(mu), self.alpha(mu) - 1j * self.omega(mu)]
        vals += [r + 0j for r in self.stable_reals]
        for a, b in self.stable_pairs:
            vals += [a + 1j * b, a - 1j * b]
        return np.array(vals)

    def eigencurves(self, mu_min, mu_max, num=201):
        return EigenCurves.from_scalar_curves(
            self.alpha, self.omega, lambda mu: self.nu, mu_min, mu_max, num)

    # -- geometry --

    def subspace_basis(self):
        """Orthonormal basis of the bifurcating spectral subspace."""
        return self.mixing[:, :2].copy()

    def unstable_direction(self, mu):
        """Real part of the bifurcating eigenvector (unit norm)."""
        return self.mixing[:, 0].copy()

    def pair_amplitude(self, x):
        y = self.mixing[:, :2].T @ np.asarray(x, dtype=float).T
        return np.hypot(y[0], y[1])

    def limit_cycle_radius(self, mu):
        """Exact pair-plane cycle radius from alpha = rho + quintic rho^2."""
        a = self.alpha(mu)
        if a <= 0:
            raise WrongRegime(f"no limit cycle at mu={mu}: alpha={a} <= 0")
        if self.quintic == 0:
            return float(np.sqrt(a))
        rho = (np.sqrt(1.0 + 4.0 * self.quintic * a) - 1.0) / (2.0 * self.quintic)
        return float(np.sqrt(rho))

    def reference_amplitude(self):
        """Cycle radius at mu0 + 300, the perturbation yardstick."""
        return self.limit_cycle_radius(self.mu0 + 300.0)

    # -- dynamics --

    def rhs(self, mu):
        a, om = self.alpha(mu), self.omega(mu)
        O, B = self.mixing, self.stable_block
        g, c3, kappa = self.quad_coupling, self.cubic_coupling, self.quintic
        n = self.dimension

        def f(x):
            y = O.T @ x
            rho = y[0] * y[0] + y[1] * y[1]
            damp = rho + kappa * rho * rho
            dy = np.empty(n)
            dy[0] = a * y[0] - om * y[1] - damp * y[0]
            dy[1] = om * y[0] + a * y[1] - damp * y[1]
            dy[2:] = B @ y[2:] + g * rho + c3 * y[0] ** 3
            return O @ dy

        return f

    def linearize(self, mu):
        n = self.dimension
        A = np.zeros((n, n))
        a, om = self.alpha(mu), self.omega(mu)
        A[:2, :2] = [[a, -om], [om, a]]
        A[2:, 2:] = self.stable_block
        return self.mixing @ A @ self.mixing.T

    def to_dict(self):
        return {
            "type": "surrogate",
            "dimension": self.dimension,
            "seed": self.seed,
            "mu0": self.mu0,
            "omega0": self.omega0,
            "alpha_slope": self.alpha_slope,
            "omega_slope": self.omega_slope,
            "nu": self.nu,
            "quintic": self.quintic,
        }


class SystemSpec:
    """File-backed polynomial system with a named parameter.

    The spec document holds dimension, degree, a term list of (component,
    multi-index, coefficient) entries where coefficients may be arithmetic
    expressions of the parameter symbol and named constants, and optional
    substitution values for those constants.
    """

    def __init__(self, document):
        self.dimension = int(document["dimension"])
        self.degree = int(document.get("degree", 0))
        self.parameter = document.get("parameter", "mu")
        self.substitutions = {k: float(v) for k, v in document.get("substitutions", {}).items()}
        self.terms = []
        for entry in document["terms"]:
            if isinstance(entry, dict):
                self.terms.append((int(entry["component"]),
                                   tuple(int(e) for e in entry["exponents"]),
                                   entry["coefficient"]))
            else:
                comp, exps, coeff = entry
                self.terms.append((int(comp), tuple(int(e) for e in exps), coeff))

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls(json.load(fh))

    def field(self, mu):
        names = dict(self.substitutions)
        names[self.parameter] = float(mu)
        resolved = []
        for comp, exps, coeff in self.terms:
            value = coeff if isinstance(coeff, (int, float)) else evaluate_expression(coeff, names)
            resolved.append((comp, exps, value))
        return PolyVectorField.from_terms(self.dimension, resolved)

    def rhs(self, mu):
        return self.field(mu)

    def linearize(self, mu):
        return self.field(mu).linear_matrix


def load_system(source):
    """Resolve a system reference: a spec dict/path, or a built-in type tag.

    Documents with type "surrogate" build a SurrogateSystem, type
    "hopf-normal-form" a 3D polynomial field spec, and type "polynomial" (or
    no type) a SystemSpec.
    """
    if isinstance(source, (SurrogateSystem, SystemSpec, PolyVectorField)):
        return source
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            source = json.load(fh)
    kind = source.get("type", "polynomial")
    if kind == "surrogate":
        kwargs = {k: source[k] for k in
                  ("dimension", "seed", "mu0", "omega0", "alpha_slope",
                   "omega_slope", "nu", "quintic") if k in source}
        return SurrogateSystem(**kwargs)
    if kind == "hopf-normal-form":
        omega = float(source.get("omega", 1.0))
        sigma = float(source.get("sigma", -5.0))
        document = {
            "dimension": 3,
            "degree": 3,
            "parameter": source.get("parameter", "mu"),
            "terms": [
                (0, (1, 0, 0), "mu"), (0, (0, 1, 0), -omega),
                (0, (3, 0, 0), -1.0), (0, (1, 2, 0), -1.0),
                (1, (1, 0, 0), omega), (1, (0, 1, 0), "mu"),
                (1, (2, 1, 0), -1.0), (1, (0, 3, 0), -1.0),
                (2, (0, 0, 1), sigma), (2, (2, 0, 0), 1.0), (2, (0, 2, 0), 1.0),
            ],
        }
        return SystemSpec(document)
    if kind == "polynomial":
        return SystemSpec(source)
    raise ParssmError(f"unknown system type {kind!r}")


def _resolve_rhs(system, mu):
    if isinstance(system, PolyVectorField):
        return system
    if hasattr(system, "rhs"):
        return system.rhs(mu)
    if callable(system):
        return system
    raise ParssmError(f"cannot integrate object of type {type(system).__name__}")


def integrate(system, x0, mu, t_end, dt, rtol=1e-9, atol=1e-12, method="RK45",
              fixed_point=None, provenance=None):
    """Adaptive explicit Runge-Kutta integration resampled to a uniform grid.

    The solver runs at local tolerance ``rtol`` (default 1e-9) and the
    solution is evaluated on the grid 0, dt, ..., t_end. Raises BlowUp when
    the state norm reaches 1e6.
    """
    if dt <= 0:
        raise ParssmError(f"dt must be positive, got {dt}")
    if t_end < dt:
        raise ParssmError(f"t_end must be at least dt, got {t_end} < {dt}")
    f = _resolve_rhs(system, mu)
    x0 = np.asarray(x0, dtype=float)
    m = int(round(t_end / dt))
    grid = np.arange(m + 1) * dt

    def wrapped(t, y):
        return f(y)

    def blowup(t, y):
        return _BLOWUP_NORM - np.linalg.norm(y)

    blowup.terminal = True
    sol = solve_ivp(wrapped, (0.0, grid[-1]), x0, method=method, rtol=rtol, atol=atol,
                    t_eval=grid, events=blowup, dense_output=False)
    if sol.t_events[0].size:
        raise BlowUp(f"state norm reached {_BLOWUP_NORM:.0e} at t = {sol.t_events[0][0]:.6g}")
    if not sol.success:
        raise ParssmError(f"integration failed: {sol.message}")
    fp = np.zeros(len(x0)) if fixed_point is None else np.asarray(fixed_point, dtype=float)
    return TrajectoryDataset(
        mu=float(mu), dt=float(dt), times=grid, states=sol.y.T - fp, fixed_point=fp,
        provenance=dict(provenance or {}, x0_norm=float(np.linalg.norm(x0)),
                        rtol=rtol, method=method),
    )


def _pre_bifurcation_data(sys, mu, rng, dt, t_end, rtol):
    a = sys.alpha(mu)
    if a >= 0:
        raise WrongRegime(f"pre-bif protocol needs alpha < 0, got alpha({mu}) = {a}")
    period = 2.0 * np.pi / sys.omega(mu)
    dt = dt or period / 40.0
    ref = sys.reference_amplitude()

    # controlled excitation: a random direction inside the spectral subspace
    # plus an equal-magnitude random transverse component (the transverse part
    # is integrated away before the retained window starts)
    pair = rng.standard_normal(2)
    pair /= np.linalg.norm(pair)
    perp = rng.standard_normal(sys.dimension)
    basis = sys.subspace_basis()
    perp -= basis @ (basis.T @ perp)
    perp /= np.linalg.norm(perp)
    x0 = 0.1 * ref * (basis @ pair + perp)

    span = t_end or min(max(4.0 / abs(a), 20.0 * period), 1200.0)
    # retain data only after the transverse transient has contracted by 1e3
    # relative to the pair, so the snapshots lie on the manifold
    t_cut = np.log(1e3) / (a - sys.nu)
    t_cut = max(t_cut, span / 9.0)
    data = integrate(sys, x0, mu, span + t_cut, dt, rtol=rtol,
                     provenance={"protocol": "pre-bif"})
    k = int(np.ceil(t_cut / dt))
    return TrajectoryDataset(
        mu=data.mu, dt=data.dt, times=data.times[k:] - data.times[k],
        states=data.states[k:], fixed_point=data.fixed_point,
        provenance=dict(data.provenance, truncated_rows=k, t_cut=float(t_cut)),
    )


def _post_bifurcation_data(sys, mu, dt, t_end, rtol):
    a = sys.alpha(mu)
    if a <= 0:
        raise WrongRegime(f"post-bif protocol needs alpha > 0, got alpha({mu}) = {a}")
    period = 2.0 * np.pi / sys.omega(mu)
    dt = dt or period / 40.0
    eps = 1e-4
    x0 = eps * sys.unstable_direction(mu)
    # saturation estimate from the pair-plane radial flow, then verified below
    t_sat = np.log(1e4 * a / eps ** 2) / (2.0 * a)
    span = t_end or t_sat + 8.0 * period

    for _ in range(4):
        data = integrate(sys, x0, mu, span, dt, rtol=rtol,
                         provenance={"protocol": "post-bif"})
        per_period = max(1, int(round(period / dt)))
        radii = sys.pair_amplitude(data.states + data.fixed_point)
        if len(radii) > per_period:
            r_end, r_prev = radii[-1], radii[-1 - per_period]
            if abs(r_end - r_prev) <= 1e-4 * max(r_end, 1e-12):
                return data
        if t_end is not None:
            break  # caller fixed the horizon; return what was asked
        span *= 1.5
    return data


def generate_training_data(sys, mu, protocol, rng_seed, dt=None, t_end=None, rtol=1e-9):
    """Protocol-driven trajectory generation on the surrogate.

    "pre-bif" moderately perturbs the stable state and truncates the initial
    segment until the transverse transient has contracted; "post-bif" perturbs
    by 1e-4 along the unstable eigenvector and integrates until the orbit
    radius is stable to 1e-4 per period.
    """
    rng = np.random.default_rng(rng_seed)
    if protocol in ("pre-bif", "pre"):
        data = _pre_bifurcation_data(sys, mu, rng, dt, t_end, rtol)
    elif protocol in ("post-bif", "post"):
        data = _post_bifurcation_data(sys, mu, dt, t_end, rtol)
    else:
        raise ParssmError(f"unknown protocol {protocol!r}")
    data.provenance["seed"] = int(rng_seed)
    return data


def linearize(system, mu):
    """Exact degree-1 block of the system at the given parameter."""
    if isinstance(system, PolyVectorField):
        return system.linear_matrix
    if hasattr(system, "linearize"):
        return system.linearize(mu)
    raise ParssmError(f"cannot linearize object of type {type(system).__name__}")
