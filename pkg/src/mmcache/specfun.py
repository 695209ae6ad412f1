"""Special functions and quadrature used by the closed-form distributions.

All functions accept numpy arrays for the "x"-like argument and broadcast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_EPS = 1e-16
_MAX_ITER = 500


# incomplete gamma ---------------------------------------------------------

def _gamma_series(s, x):
    """gamma(s, x) by the power series; converges fast for x < s + 1."""
    term = np.ones_like(x) / s
    total = term.copy()
    ap = np.full_like(x, s)
    for _ in range(_MAX_ITER):
        ap = ap + 1.0
        term = term * x / ap
        total = total + term
        if np.all(np.abs(term) <= np.abs(total) * _EPS):
            break
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pref = s * np.log(x) - x
    return np.where(x > 0, total * np.exp(log_pref), 0.0)


def _upper_gamma_cf(s, x):
    """Gamma(s, x) by the Legendre continued fraction (modified Lentz)."""
    tiny = 1e-300
    b = x + 1.0 - s
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) <= _EPS):
            break
    return np.exp(s * np.log(x) - x) * h


def lower_incomplete_gamma(s: float, x):
    """Lower incomplete gamma function gamma(s, x) = int_0^x t^(s-1) e^-t dt."""
    if not s > 0:
        raise ValueError(f"shape parameter must be > 0, got {s!r}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("argument must be >= 0")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    low = x < s + 1.0
    if np.any(low):
        out[low] = _gamma_series(s, x[low])
    high = ~low
    if np.any(high):
        xh = x[high]
        finite = np.isfinite(xh)
        res = np.full_like(xh, math.gamma(s))
        if np.any(finite):
            res[finite] = math.gamma(s) - _upper_gamma_cf(s, xh[finite])
        out[high] = res
    return float(out[0]) if scalar else out


def truncated_power_moment(m: float, c, R: float, a: float):
    """int_0^R r^m exp(-c r^a) dr for c >= 0 (vectorized over c).

    Equals c^(-(m+1)/a) gamma((m+1)/a, c R^a) / a, with the c -> 0 limit
    R^(m+1)/(m+1) handled explicitly.
    """
    c = np.asarray(c, dtype=float)
    s = (m + 1.0) / a
    out = np.full(c.shape, R ** (m + 1.0) / (m + 1.0))
    pos = c > 0
    if np.any(pos):
        cp = c[pos]
        out[pos] = lower_incomplete_gamma(s, cp * R ** a) * cp ** (-s) / a
    return out if out.ndim else float(out)


def erfc(x):
    """Complementary error function (delegates to the C library)."""
    if np.ndim(x) == 0:
        return math.erfc(float(x))
    return np.vectorize(math.erfc, otypes=[float])(x)


# Gauss hypergeometric 2F1(1, b; b+1; -z) ----------------------------------

def _hyp_series_small(b, z):
    # b * sum_n (-z)^n / (n + b), for z <= 0.5
    total = np.zeros_like(z)
    power = np.ones_like(z)
    for n in range(200):
        term = power / (n + b)
        total = total + term
        if np.all(np.abs(term) <= _EPS * np.abs(total)):
            break
        power = power * (-z)
    return b * total


def _hyp_pfaff(b, z):
    # Pfaff: 2F1(1,b;b+1;-z) = 2F1(1,1;b+1;w)/(1+z), w = z/(1+z) <= 2/3
    w = z / (1.0 + z)
    total = np.ones_like(z)
    term = np.ones_like(z)
    for n in range(1, 400):
        term = term * w * n / (b + n)
        total = total + term
        if np.all(term <= _EPS * total):
            break
    return total / (1.0 + z)


def _base_integral(c, z):
    """int_0^1 t^(c-1)/(1+zt) dt for 0 < c <= 1 and z > 2."""
    if c == 1.0:
        return np.log1p(z) / z
    # int_0^inf minus int_1^inf; the latter is (1/z) sum (-1/z)^n / (n+1-c)
    tail = np.zeros_like(z)
    power = np.ones_like(z)
    inv = 1.0 / z
    for n in range(200):
        term = power / (n + 1.0 - c)
        tail = tail + term
        if np.all(np.abs(term) <= _EPS * np.abs(tail)):
            break
        power = power * (-inv)
    return z ** (-c) * math.pi / math.sin(math.pi * c) - inv * tail


def _hyp_large(b, z):
    """Upward recursion J_c = (1/(c-1) - J_{c-1})/z from a base c in (0, 1].

    With J_c = int_0^1 t^(c-1)/(1+zt) dt, the result is b * J_b. The
    recursion damps errors by 1/z, so it is stable for z > 1.
    """
    n_up = math.ceil(b) - 1
    c = b - n_up
    J = _base_integral(c, z)
    for _ in range(n_up):
        c += 1.0
        J = (1.0 / (c - 1.0) - J) / z
    return b * J


@lru_cache(maxsize=8)
def _log_rule(n_panels: int, n_nodes: int):
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _hyp_quadrature(b, z):
    """b * int_0^inf exp(-b y)/(1 + z e^-y) dy on a composite Gauss rule."""
    Y = np.log1p(z) + 45.0 / b
    u, w = _log_rule(64, 16)
    y = Y[:, None] * u[None, :]
    f = np.exp(-b * y) / (1.0 + z[:, None] * np.exp(-y))
    return b * Y * (f @ w)


def hyp2f1_special(b: float, z):
    """2F1(1, b; b+1; -z) for b > 0 and z >= 0.

    Uses the power series near the origin, the Pfaff-transformed series for
    moderate z, and an upward recursion anchored at a closed-form base
    integral for large z. When b is within 1e-3 of an integer (where the
    base reflection term is ill-conditioned) a composite Gauss-Legendre rule
    on the log-substituted integral is used instead.
    """
    if not b > 0:
        raise ValueError(f"b must be > 0, got {b!r}")
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(np.isnan(z)):
        raise ValueError("z must be >= 0")
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)

    small = z <= 0.5
    mid = (z > 0.5) & (z <= 2.0)
    large = z > 2.0
    if np.any(small):
        out[small] = _hyp_series_small(b, z[small])
    if np.any(mid):
        out[mid] = _hyp_pfaff(b, z[mid])
    if np.any(large):
        frac = b - math.floor(b)
        near_int = 0.0 < min(frac, 1.0 - frac) < 1e-3
        zl = z[large]
        out[large] = _hyp_quadrature(b, zl) if near_int else _hyp_large(b, zl)
    return float(out[0]) if scalar else out


# quadrature ---------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "gauss_legendre"

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a: float, b: float) -> QuadratureRule:
    """n-point Gauss-Legendre rule mapped to [a, b]."""
    if n < 1:
        raise ValueError("need at least one node")
    x, w = _leggauss(int(n))
    half = 0.5 * (b - a)
    return QuadratureRule(0.5 * (a + b) + half * x, half * w)


def composite_gauss_legendre(edges, n: int) -> QuadratureRule:
    """Gauss-Legendre rule on each interval between consecutive ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss(int(n))
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return QuadratureRule(nodes, weights, kind="composite")


TAIL_TOL = 1e-10


def semi_infinite_cutoff(scale: float, factor: float = 40.0, moment: int = 1) -> float:
    """Truncation point for integrals with an exp(-r/scale) envelope.

    The relative tail of int r^moment exp(-r/scale) dr beyond the cutoff is
    Q(moment+1, factor), which must stay below ``TAIL_TOL``.
    """
    tail = 1.0 - lower_incomplete_gamma(moment + 1.0, factor) / math.gamma(moment + 1.0)
    if tail > TAIL_TOL:
        raise ValueError(f"cutoff factor {factor} leaves a relative tail of {tail:.2e}")
    return factor * scale
