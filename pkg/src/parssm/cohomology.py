"""Order-by-order solution of the invariance equation for a 2D manifold graph.

The linear part is block-diagonalized over a real eigenframe; the solve runs in
complex diagonal coordinates where each order reduces to a diagonal linear
system, and results are converted back to real coordinates at the end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DefectiveLinearPart,
    EigenvalueCollision,
    ResonantOrder,
)
from .polynomials import (
    linear_substitution_2d,
    monomial_keys,
    p2_diff,
    p2_mul,
    p2_pow,
    p2_zero,
)
from .spectra import Spectrum, compute_spectrum

__all__ = [
    "EigenFrame",
    "SsmExpansion",
    "build_eigenframe",
    "solve_ssm",
    "invariance_residual",
    "rotate_expansion",
]

_COLLISION_TOL = 1e-8
_COND_LIMIT = 1e8
_BLOCK_RTOL = 1e-9


@dataclass(frozen=True)
class EigenFrame:
    """Real bases of the 2D spectral subspace and its complement.

    ``S_u`` (N x 2) spans the subspace with ``A @ S_u = S_u @ A_u`` and
    ``A_u = [[alpha, -omega], [omega, alpha]]``; ``S_v`` (N x (N-2)) spans the
    complement with block-diagonal real ``A_v``. ``P`` holds the complex
    eigenvector change of variables used internally, ordered pair-first, and
    ``modes`` describes the complement structure as ("real", column) or
    ("pair", first column) entries.
    """

    S_u: np.ndarray
    S_v: np.ndarray
    A_u: np.ndarray
    A_v: np.ndarray
    lambdas: np.ndarray      # complex eigenvalues, order matching P columns
    P: np.ndarray            # complex change of variables, x = P z
    P_inv: np.ndarray
    modes: tuple             # complement structure in z-ordering
    condition: float         # cond([S_u | S_v])

    @property
    def dimension(self):
        return self.S_u.shape[0]

    @property
    def frame(self):
        return np.hstack([self.S_u, self.S_v])


def _normalize_complex_vector(v):
    # deterministic phase: largest-magnitude entry made real positive;
    # scale ||v|| = sqrt(2) so [Re v, -Im v] is orthonormal for normal matrices
    j = int(np.argmax(np.abs(v)))
    v = v * (abs(v[j]) / v[j])
    return v * (np.sqrt(2.0) / np.linalg.norm(v))


def build_eigenframe(A, spectrum=None):
    """Diagonalize a semisimple real matrix over the marked conjugate pair.

    Raises DefectiveLinearPart when the eigenvector matrix condition number
    exceeds 1e8 and EigenvalueCollision when two eigenvalues coincide within
    1e-8 (disjointness is required for the order-by-order solve).
    """
    A = np.asarray(A, dtype=float)
    if spectrum is None:
        spectrum = compute_spectrum(A)
    elif not isinstance(spectrum, Spectrum):
        raise TypeError("spectrum must be a Spectrum")
    n = A.shape[0]
    w, V = np.linalg.eig(A)
    cond_v = np.linalg.cond(V)
    if not np.isfinite(cond_v) or cond_v > _COND_LIMIT:
        raise DefectiveLinearPart(f"eigenvector matrix condition {cond_v:.3e} exceeds {_COND_LIMIT:.0e}")
    for i in range(n):
        for j in range(i + 1, n):
            if abs(w[i] - w[j]) < _COLLISION_TOL * max(1.0, abs(w[i])):
                raise EigenvalueCollision(f"eigenvalues {w[i]} and {w[j]} coincide within {_COLLISION_TOL}")

    # match computed eigenvalues to the sorted spectrum
    target = spectrum.eigenvalues
    remaining = list(range(n))
    matched = []
    for t in target:
        k = min(remaining, key=lambda i: abs(w[i] - t))
        matched.append(k)
        remaining.remove(k)

    i_pair, j_pair = spectrum.subspace_indices
    lam1 = target[i_pair] if target[i_pair].imag > 0 else target[j_pair]
    k1 = matched[i_pair] if w[matched[i_pair]].imag > 0 else matched[j_pair]
    v1 = _normalize_complex_vector(V[:, k1])

    S_u = np.column_stack([v1.real, -v1.imag])
    alpha, omega = lam1.real, lam1.imag
    A_u = np.array([[alpha, -omega], [omega, alpha]])

    # complement, in sorted order, conjugate pairs collapsed to one entry
    outer = [(l, target[l], matched[l]) for l in range(n) if l not in (i_pair, j_pair)]
    cols_P = [v1 / 2.0, np.conj(v1) / 2.0]
    lambdas = [lam1, np.conj(lam1)]
    S_v_cols, A_v_blocks, modes = [], [], []
    seen = set()
    col = 0
    for l, lam, k in outer:
        if l in seen:
            continue
        if abs(lam.imag) <= 1e-9 * max(1.0, abs(lam)):
            u = V[:, k].real
            u = u / np.linalg.norm(u)
            jj = int(np.argmax(np.abs(u)))
            u = u * np.sign(u[jj])
            S_v_cols.append(u)
            A_v_blocks.append(np.array([[lam.real]]))
            cols_P.append(u.astype(complex))
            lambdas.append(lam.real + 0j)
            modes.append(("real", col))
            col += 1
        else:
            # find the conjugate partner among the remaining outer entries
            partner = next(l2 for l2, lam2, _ in outer
                           if l2 not in seen and l2 != l
                           and abs(lam2 - np.conj(lam)) <= 1e-9 * max(1.0, abs(lam)))
            seen.add(partner)
            lam_p = lam if lam.imag > 0 else np.conj(lam)
            k_p = k if w[k].imag > 0 else matched[partner]
            q = _normalize_complex_vector(V[:, k_p])
            S_v_cols.extend([q.real, -q.imag])
            a, b = lam_p.real, lam_p.imag
            A_v_blocks.append(np.array([[a, -b], [b, a]]))
            cols_P.extend([q / 2.0, np.conj(q) / 2.0])
            lambdas.extend([lam_p, np.conj(lam_p)])
            modes.append(("pair", col))
            col += 2
        seen.add(l)

    S_v = np.column_stack(S_v_cols) if S_v_cols else np.zeros((n, 0))
    A_v = np.zeros((n - 2, n - 2))
    at = 0
    for blk in A_v_blocks:
        s = blk.shape[0]
        A_v[at:at + s, at:at + s] = blk
        at += s
    P = np.column_stack(cols_P)
    P_inv = np.linalg.inv(P)

    frame = np.hstack([S_u, S_v])
    cond = np.linalg.cond(frame)
    for M, B, name in ((S_u, A_u, "S_u"), (S_v, A_v, "S_v")):
        if M.shape[1] and np.linalg.norm(A @ M - M @ B) > _BLOCK_RTOL * max(1.0, np.linalg.norm(A) * np.linalg.norm(M)):
            raise DefectiveLinearPart(f"block relation A {name} = {name} A_block violated")

    return EigenFrame(S_u, S_v, A_u, A_v, np.array(lambdas), P, P_inv, tuple(modes), cond)


@dataclass(frozen=True)
class SsmExpansion:
    """Graph and reduced-dynamics coefficients of a 2D invariant manifold.

    ``h`` maps (k1, k2) with 2 <= |k| <= order to real complement coordinates
    (length N-2), ``W = S_v @ h`` lifts them to the full space, and ``R`` maps
    (k1, k2) with 1 <= |k| <= order+1 to the reduced vector field. ``h_complex``
    retains the diagonal-coordinate coefficients (conjugate-symmetric).
    """

    order: int
    frame: EigenFrame
    h: dict
    W: dict
    R: dict
    h_complex: dict

    def graph(self, u):
        """Complement coordinates v = h(u) for one reduced point."""
        u = np.asarray(u, dtype=float)
        out = np.zeros(self.frame.S_v.shape[1])
        for (k1, k2), vec in self.h.items():
            out += vec * (u[0] ** k1 * u[1] ** k2)
        return out

    def graph_jacobian(self, u):
        u = np.asarray(u, dtype=float)
        J = np.zeros((self.frame.S_v.shape[1], 2))
        for (k1, k2), vec in self.h.items():
            if k1:
                J[:, 0] += vec * (k1 * u[0] ** (k1 - 1) * u[1] ** k2)
            if k2:
                J[:, 1] += vec * (k2 * u[0] ** k1 * u[1] ** (k2 - 1))
        return J

    def reduced_rhs(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros(2)
        for (k1, k2), vec in self.R.items():
            out += vec * (u[0] ** k1 * u[1] ** k2)
        return out

    def lift(self, u):
        """Full-space point S_u u + S_v h(u)."""
        return self.frame.S_u @ np.asarray(u, dtype=float) + self.frame.S_v @ self.graph(u)


def _compose_field(field, frame, H, trunc, size):
    """F(z) = P^{-1} f0(P (z1, z2, h(z))) as dense bivariate arrays per component."""
    n = field.dimension
    P, P_inv = frame.P, frame.P_inv
    X = []
    for i in range(n):
        c = p2_zero(size)
        c[1, 0] = P[i, 0]
        c[0, 1] = P[i, 1]
        for l in range(n - 2):
            if P[i, 2 + l] != 0:
                c = c + P[i, 2 + l] * H[l]
        X.append(c)
    G = [p2_zero(size) for _ in range(n)]
    for exps, cv in field.nonlinear_terms().items():
        term = p2_zero(size)
        term[0, 0] = 1.0
        for i, e in enumerate(exps):
            if e:
                term = p2_mul(term, p2_pow(X[i], e, trunc), trunc)
        for i in range(n):
            if cv[i]:
                G[i] = G[i] + cv[i] * term
    return [sum(P_inv[j, i] * G[i] for i in range(n)) for j in range(n)]


def _realify(poly, size):
    """Substitute z1 = u1 + i u2, z2 = u1 - i u2 into a dense bivariate array."""
    u1 = p2_zero(size)
    u1[1, 0] = 1.0
    u1[0, 1] = 1.0j
    u2 = p2_zero(size)
    u2[1, 0] = 1.0
    u2[0, 1] = -1.0j
    out = p2_zero(size)
    trunc = size - 1
    for k1 in range(size):
        for k2 in range(size - k1):
            if poly[k1, k2] != 0:
                out = out + poly[k1, k2] * p2_mul(p2_pow(u1, k1, trunc), p2_pow(u2, k2, trunc), trunc)
    return out


def solve_ssm(field, frame, K, res_tol=1e-6):
    """Solve the cohomological equations up to order K.

    At each multi-index k the diagonal operator entry lambda_l - (k1 lambda_1 +
    k2 lambda_2) must exceed ``res_tol * |lambda_l|`` in magnitude; otherwise
    ResonantOrder names the violating order and multi-index. The reduced
    dynamics are assembled to order K + 1 from the truncated graph. All
    returned coefficients are real.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    n = field.dimension
    if frame.dimension != n:
        raise ValueError("field and frame dimensions differ")
    lam = frame.lambdas
    size = K + 2  # holds degrees up to K+1 for the reduced dynamics
    H = [p2_zero(size) for _ in range(n - 2)]

    for order in range(2, K + 1):
        F = _compose_field(field, frame, H, order, size)
        for k1 in range(order, -1, -1):
            k2 = order - k1
            combo = k1 * lam[0] + k2 * lam[1]
            for l in range(n - 2):
                rhs = complex(0.0)
                for var in (0, 1):
                    rhs += p2_mul(p2_diff(H[l], var), F[var], order)[k1, k2]
                rhs -= F[2 + l][k1, k2]
                L = lam[2 + l] - combo
                if abs(L) <= res_tol * abs(lam[2 + l]):
                    raise ResonantOrder(order, (k1, k2), 2 + l, abs(L) / abs(lam[2 + l]))
                H[l][k1, k2] = rhs / L

    # reduced dynamics to order K+1 with the complete graph
    F = _compose_field(field, frame, H, K + 1, size)
    R_complex = [F[0].copy(), F[1].copy()]
    R_complex[0][1, 0] += lam[0]
    R_complex[1][0, 1] += lam[1]

    # conjugate symmetry of the diagonal-coordinate coefficients
    h_complex = {}
    for (k1, k2) in monomial_keys(2, K):
        h_complex[(k1, k2)] = np.array([H[l][k1, k2] for l in range(n - 2)])
    _check_conjugate_symmetry(h_complex, frame)

    # realify the graph: per complement mode, real rows in S_v coordinates
    h_real = {k: np.zeros(n - 2) for k in monomial_keys(2, K)}
    mode_to_z = []
    z = 0
    for kind, col in frame.modes:
        mode_to_z.append((kind, col, z))
        z += 2 if kind == "pair" else 1
    for kind, col, z in mode_to_z:
        real_poly = _realify(H[z], size)
        if kind == "real":
            _assert_real(real_poly, "graph coefficient")
            for (k1, k2) in monomial_keys(2, K):
                h_real[(k1, k2)][col] = real_poly[k1, k2].real
        else:
            for (k1, k2) in monomial_keys(2, K):
                h_real[(k1, k2)][col] = real_poly[k1, k2].real
                h_real[(k1, k2)][col + 1] = real_poly[k1, k2].imag

    W = {k: frame.S_v @ v for k, v in h_real.items()}

    # reduced dynamics: udot1 = Re(zdot1), udot2 = Im(zdot1) under z1 = u1 + i u2
    r_poly = _realify(R_complex[0], size)
    R = {}
    for (k1, k2) in monomial_keys(1, K + 1):
        c = r_poly[k1, k2]
        R[(k1, k2)] = np.array([c.real, c.imag])

    return SsmExpansion(K, frame, h_real, W, R, h_complex)


def _check_conjugate_symmetry(h_complex, frame, tol=1e-8):
    scale = max((np.max(np.abs(v)) for v in h_complex.values()), default=0.0)
    if scale == 0.0:
        return
    conj_index = {}
    z = 0
    for kind, _ in frame.modes:
        if kind == "real":
            conj_index[z] = z
            z += 1
        else:
            conj_index[z] = z + 1
            conj_index[z + 1] = z
            z += 2
    for (k1, k2), vec in h_complex.items():
        mirror = h_complex[(k2, k1)]
        for z, zc in conj_index.items():
            if abs(vec[z] - np.conj(mirror[zc])) > tol * scale:
                raise DefectiveLinearPart(
                    f"conjugate symmetry violated at {(k1, k2)}: solver output is inconsistent")


def _assert_real(poly, what, tol=1e-9):
    scale = max(np.max(np.abs(poly.real)), 1e-300)
    if np.max(np.abs(poly.imag)) > tol * max(1.0, scale):
        raise DefectiveLinearPart(f"{what} has residual imaginary part above tolerance")


def invariance_residual(field, expansion, radius, n_samples=64):
    """Max norm of the invariance defect over a deterministic disc sample.

    The defect A_v h(u) + f_v(u, h(u)) - Dh(u) [A_u u + f_u(u, h(u))] is
    O(|u|^(K+1)) for a correct order-K expansion; this is a verification
    device, not part of the solve.
    """
    if n_samples < 16:
        raise ValueError("n_samples must be at least 16")
    frame = expansion.frame
    T = frame.frame
    T_inv = np.linalg.inv(T)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    worst = 0.0
    for i in range(n_samples):
        r = radius * np.sqrt((i + 1) / n_samples)
        th = i * golden
        u = np.array([r * np.cos(th), r * np.sin(th)])
        hu = expansion.graph(u)
        x = frame.S_u @ u + frame.S_v @ hu
        fy = T_inv @ field.nonlinear(x)
        f_u, f_v = fy[:2], fy[2:]
        defect = frame.A_v @ hu + f_v - expansion.graph_jacobian(u) @ (frame.A_u @ u + f_u)
        worst = max(worst, float(np.linalg.norm(defect)))
    return worst


def rotate_expansion(expansion, Q):
    """The same manifold expressed over the rotated subspace frame S_u @ Q.

    Coefficients transform by the induced action on monomials: h'(u') =
    h(Q u') and R'(u') = Q^T R(Q u'). Lifted trajectories are invariant under
    this gauge change.
    """
    Q = np.asarray(Q, dtype=float)
    frame = expansion.frame
    new_frame = EigenFrame(
        S_u=frame.S_u @ Q,
        S_v=frame.S_v,
        A_u=Q.T @ frame.A_u @ Q,
        A_v=frame.A_v,
        lambdas=frame.lambdas,
        P=frame.P,
        P_inv=frame.P_inv,
        modes=frame.modes,
        condition=frame.condition,
    )
    h_new = linear_substitution_2d(expansion.h, Q)
    W_new = {k: frame.S_v @ v for k, v in h_new.items()}
    R_sub = linear_substitution_2d(expansion.R, Q)
    R_new = {k: Q.T @ v for k, v in R_sub.items()}
    return SsmExpansion(expansion.order, new_frame, h_new, W_new, R_new, expansion.h_complex)
