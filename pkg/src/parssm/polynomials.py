"""Polynomial building blocks.

Two representations are used throughout the package:

* dense bivariate arrays ``c[k1, k2]`` holding coefficients of
  ``u1**k1 * u2**k2`` up to a total-degree truncation (the workhorse of the
  order-by-order invariance solver), and
* sparse N-variable vector fields keyed by exponent multi-indices
  (:class:`PolyVectorField`).
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ParssmError

__all__ = [
    "monomial_keys",
    "design_matrix",
    "linear_substitution_2d",
    "p2_zero",
    "p2_mul",
    "p2_pow",
    "p2_diff",
    "p2_coeff_dict",
    "PolyVectorField",
    "evaluate_expression",
]


def monomial_keys(min_order, max_order):
    """Graded list of bivariate exponent pairs (k1, k2) with min <= k1+k2 <= max.

    Within each total degree the first exponent descends, so the order-2 block
    reads (2,0), (1,1), (0,2).
    """
    return [(d - i, i) for d in range(min_order, max_order + 1) for i in range(d + 1)]


def design_matrix(U, keys):
    """Evaluate monomials u^k for each row of U (m x 2) -> (m x len(keys))."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    return np.column_stack([U[:, 0] ** k1 * U[:, 1] ** k2 for (k1, k2) in keys])


def linear_substitution_2d(coeffs, L):
    """Coefficients of p(L @ u) given coefficients of p(u).

    ``coeffs`` maps (k1, k2) to a coefficient (scalar or vector); the returned
    dict has the same key set. Total degree is preserved, so the key set is
    closed whenever it contains full degree blocks.
    """
    L = np.asarray(L)
    out = {k: np.zeros_like(np.asarray(v, dtype=L.dtype if L.dtype.kind == "c" else float))
           for k, v in coeffs.items()}
    for (k1, k2), val in coeffs.items():
        val = np.asarray(val)
        for i in range(k1 + 1):
            for j in range(k2 + 1):
                factor = (
                    math.comb(k1, i) * L[0, 0] ** i * L[0, 1] ** (k1 - i)
                    * math.comb(k2, j) * L[1, 0] ** j * L[1, 1] ** (k2 - j)
                )
                key = (i + j, k1 + k2 - i - j)
                out[key] = out[key] + factor * val
    return out


# --- dense bivariate arrays, complex coefficients, total-degree truncated ---

def p2_zero(size):
    return np.zeros((size, size), dtype=complex)


def _mask(size, trunc):
    i, j = np.indices((size, size))
    return (i + j) <= trunc


def p2_mul(a, b, trunc):
    """Product of two coefficient arrays, truncated at total degree ``trunc``."""
    size = a.shape[0]
    full = np.zeros((2 * size - 1, 2 * size - 1), dtype=complex)
    for i, j in np.argwhere(a != 0):
        full[i:i + size, j:j + size] += a[i, j] * b
    out = full[:size, :size].copy()
    out[~_mask(size, trunc)] = 0.0
    return out


def p2_pow(a, n, trunc):
    size = a.shape[0]
    out = p2_zero(size)
    out[0, 0] = 1.0
    for _ in range(n):
        out = p2_mul(out, a, trunc)
    return out


def p2_diff(a, var):
    """Partial derivative with respect to u1 (var=0) or u2 (var=1)."""
    out = np.zeros_like(a)
    n = a.shape[0]
    if var == 0:
        out[:-1, :] = a[1:, :] * np.arange(1, n)[:, None]
    else:
        out[:, :-1] = a[:, 1:] * np.arange(1, n)[None, :]
    return out


def p2_coeff_dict(a, keys):
    """Extract the listed (k1, k2) coefficients of a dense array into a dict."""
    return {k: a[k[0], k[1]] for k in keys}


# --- sparse N-variable polynomial vector fields ---

@dataclass(frozen=True)
class PolyVectorField:
    """Polynomial autonomous vector field with a fixed point at the origin.

    ``coefficients`` maps an exponent multi-index (tuple of length
    ``dimension``, total degree >= 1) to the vector of per-component
    coefficients. The degree-1 block is the linearization.
    """

    dimension: int
    coefficients: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for exps, vec in self.coefficients.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.dimension:
                raise ParssmError(f"multi-index {exps} has wrong length")
            if any(e < 0 for e in exps):
                raise ParssmError(f"negative exponent in {exps}")
            if sum(exps) == 0:
                raise ParssmError("constant term not allowed: origin must be a fixed point")
            vec = np.asarray(vec, dtype=float)
            if vec.shape != (self.dimension,):
                raise ParssmError(f"coefficient vector for {exps} has shape {vec.shape}")
            clean[exps] = clean.get(exps, 0.0) + vec
        ordered = sorted(clean, key=lambda k: (sum(k), tuple(-e for e in k)))
        object.__setattr__(self, "coefficients", {k: clean[k] for k in ordered})

    @classmethod
    def from_terms(cls, dimension, terms):
        """Build from (component, exponent multi-index, coefficient) triples."""
        coeffs = {}
        for comp, exps, value in terms:
            exps = tuple(int(e) for e in exps)
            vec = coeffs.setdefault(exps, np.zeros(dimension))
            vec[int(comp)] += float(value)
        return cls(dimension, coeffs)

    @property
    def max_degree(self):
        return max((sum(k) for k in self.coefficients), default=1)

    @property
    def linear_matrix(self):
        A = np.zeros((self.dimension, self.dimension))
        for j in range(self.dimension):
            exps = tuple(1 if i == j else 0 for i in range(self.dimension))
            if exps in self.coefficients:
                A[:, j] = self.coefficients[exps]
        return A

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(self.dimension)
        for exps, vec in self.coefficients.items():
            mono = 1.0
            for xi, e in zip(x, exps):
                if e:
                    mono *= xi ** e
            out += vec * mono
        return out

    def nonlinear(self, x):
        """f(x) minus the linear part."""
        return self(x) - self.linear_matrix @ np.asarray(x, dtype=float)

    def nonlinear_terms(self):
        return {k: v for k, v in self.coefficients.items() if sum(k) >= 2}


# --- arithmetic expression evaluation for system spec files ---

_ALLOWED_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a ** b,
}


def evaluate_expression(expr, names):
    """Evaluate an arithmetic expression string over the given variable names.

    Supports +, -, *, /, ** and parentheses; anything else is rejected. Used
    for parameter-dependent coefficients in system spec files.
    """
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in names:
                return float(names[node.id])
            raise ParssmError(f"unknown symbol {node.id!r} in expression {expr!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            v = ev(node.operand)
            return v if isinstance(node.op, ast.UAdd) else -v
        if isinstance(node, ast.BinOp) and type(node.op) in _ALLOWED_BINOPS:
            return _ALLOWED_BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ParssmError(f"unsupported syntax in expression {expr!r}")

    return ev(ast.parse(str(expr), mode="eval"))
