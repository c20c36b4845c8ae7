"""Selberg/Harish-Chandra transform of the point-pair kernel built from f_X.

h(t) = 2 pi int_0^inf f_X(r) sinh(r) e^{-rs} F(s, 1/2; 1; 1 - e^{-2r}) dr,
s = 1/2 + i t, evaluated by Gauss-Legendre panels split at the two kinks of
f_X.  The hypergeometric factor uses the Gauss series near z = 0 and the
two-term connection formula around z = 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special

from .paircorr import _f_from_hyp

SERIES_TZ_MAX = 8.0
NEAR_HALF = 1e-4
_SQRT_PI = math.sqrt(math.pi)


class StripError(ValueError):
    """Spectral parameter outside |Im t| <= 1/2."""


@dataclass(frozen=True)
class KernelSpec:
    x_param: float

    def __post_init__(self):
        if not self.x_param > 0:
            raise ValueError("X must be positive")

    @cached_property
    def r1(self) -> float:
        return math.asinh(self.x_param)

    @cached_property
    def r2(self) -> float:
        return 2.0 * math.asinh(self.x_param / 2.0)


@dataclass(frozen=True)
class TransformValue:
    t: complex
    h: complex
    est_abs_error: float


# --- kernel --------------------------------------------------------------------

def _f_arr(X: float, r):
    r = np.asarray(r, dtype=float)
    return _f_from_hyp(X, np.cosh(r), np.sinh(r), r)


def f_kernel(spec: KernelSpec, r):
    if np.any(np.asarray(r) < 0):
        raise ValueError("r must be nonnegative")
    out = _f_arr(spec.x_param, r)
    return float(out) if out.ndim == 0 else out


def f_kernel_prime(spec: KernelSpec, r: float, side: str = "right") -> float:
    """f_X'(r); at the kinks r1, r2 the one-sided value named by `side` is returned."""
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    X = spec.x_param
    r1, r2 = spec.r1, spec.r2
    if r < r1 or (r == r1 and side == "left"):
        return 1.0
    if r == r1:
        return -math.inf
    sh = math.sinh(r)
    w = math.sqrt((sh - X) * (sh + X))
    if r < r2 or (r == r2 and side == "left"):
        return 1.0 - 2.0 * sh / w
    # 1 - sh/w written without cancellation
    return -X * X / (w * (sh + w))


def kernel_k(spec: KernelSpec, u):
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("u must be nonnegative")
    r = np.arccosh(1.0 + 2.0 * u)
    out = _f_arr(spec.x_param, r)
    return float(out) if out.ndim == 0 else out


# --- 2F1(s, 1/2; 1; z) ---------------------------------------------------------

def _series(a, b, c, x, tol=1e-17, nmax=20000):
    """Gauss series of F(a, b; c; x) for an array x in [0, 1)."""
    x = np.asarray(x, dtype=float)
    term = np.ones(x.shape, dtype=complex)
    total = term.copy()
    n = 0
    while n < nmax:
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1))) * x
        total += term
        n += 1
        if np.all(np.abs(term) <= tol * np.maximum(np.abs(total), 1e-300)) and n > 2:
            break
    return total


def _rgamma_ratio(p, q):
    """Gamma(p) / Gamma(q) for complex p, q with Gamma(q) possibly infinite."""
    if q.real <= 0 and abs(q.imag) < 1e-15 and abs(q.real - round(q.real)) < 1e-15:
        return 0j
    return complex(np.exp(special.loggamma(p) - special.loggamma(q)))


def connection_coeffs(s: complex) -> tuple[complex, complex]:
    a = _rgamma_ratio(0.5 - s, 1.0 - s) / _SQRT_PI
    b = _rgamma_ratio(s - 0.5, s) / _SQRT_PI
    return a, b


def _connection(s: complex, x):
    """F(s,1/2;1;1-x) = A F(s,1/2;s+1/2;x) + B x^{1/2-s} F(1-s,1/2;3/2-s;x)."""
    A, B = connection_coeffs(s)
    x = np.asarray(x, dtype=float)
    f1 = _series(s, 0.5, s + 0.5, x)
    f2 = _series(1 - s, 0.5, 1.5 - s, x)
    return A * f1 + B * np.exp((0.5 - s) * np.log(x)) * f2


def hyp2f1_half(s, z):
    """F(s, 1/2; 1; z) for complex s and real z in [0, 1); arrays in z are fine."""
    s = complex(s)
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0) or np.any(z_arr >= 1):
        raise ValueError("z must lie in [0, 1)")
    zz = np.atleast_1d(z_arr)
    out = np.empty(zz.shape, dtype=complex)
    if s == 0:
        out[:] = 1.0
    elif s == 0.5:
        out[:] = 2.0 / math.pi * special.ellipk(zz)
    else:
        t_abs = abs(s - 0.5)
        use_series = (zz <= 0.5) & (t_abs * zz <= SERIES_TZ_MAX)
        if np.any(use_series):
            out[use_series] = _series(s, 0.5, 1.0, zz[use_series])
        rest = ~use_series
        if np.any(rest):
            if t_abs < NEAR_HALF:
                out[rest] = _mpmath_f(s, zz[rest])
            else:
                out[rest] = _connection(s, 1.0 - zz[rest])
    return complex(out[0]) if z_arr.ndim == 0 else out


def _mpmath_f(s, z, x=None):
    """mpmath fallback; when given, x = 1 - z is used so that z near 1 keeps its digits."""
    import mpmath

    warnings.warn("s close to 1/2: using mpmath for 2F1", RuntimeWarning, stacklevel=3)
    out = np.empty(len(z), dtype=complex)
    with mpmath.workdps(60):
        sm = mpmath.mpc(s.real, s.imag)
        for i, zv in enumerate(z):
            arg = 1 - mpmath.mpf(float(x[i])) if x is not None else mpmath.mpf(float(zv))
            out[i] = complex(mpmath.hyp2f1(sm, 0.5, 1, arg))
    return out


# --- transform -------------------------------------------------------------------

_GL = {n: np.polynomial.legendre.leggauss(n) for n in (20, 30)}


def _panel_nodes(a, b, width, n):
    if b <= a:
        return np.zeros(0), np.zeros(0)
    k = max(1, int(math.ceil((b - a) / width)))
    edges = np.linspace(a, b, k + 1)
    x, w = _GL[n]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


def _nodes(spec: KernelSpec, R: float, width: float, n: int):
    r1, r2 = spec.r1, spec.r2
    xs, ws = [], []
    x, w = _panel_nodes(0.0, r1, width, n)
    xs.append(x), ws.append(w)
    # r = r1 + q^2 removes the square-root onset right of r1; it is kept for a
    # stretch past r2 because r2 - r1 is tiny when X is small
    r3 = r2 + 2.0
    q2, q3 = math.sqrt(r2 - r1), math.sqrt(r3 - r1)
    for qa, qb in ((0.0, q2), (q2, q3)):
        q, wq = _panel_nodes(qa, qb, width / (2 * qb), n)
        xs.append(r1 + q * q), ws.append(2 * q * wq)
    x, w = _panel_nodes(r3, R, width, n)
    xs.append(x), ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _weighted_f(s: complex, r):
    """e^{-rs} F(s, 1/2; 1; 1 - e^{-2r}) on an array of r >= 0."""
    r = np.asarray(r, dtype=float)
    z = -np.expm1(-2.0 * r)
    x = np.exp(-2.0 * r)
    out = np.empty(len(r), dtype=complex)
    if s == 0.5:
        return np.exp(-0.5 * r) * (2.0 / math.pi) * special.ellipkm1(x)
    if abs(s - 0.5) < NEAR_HALF:
        return np.exp(-r * s) * _mpmath_f(s, z, x)
    direct = (z <= 0.5) & (abs(s - 0.5) * z <= SERIES_TZ_MAX)
    if np.any(direct):
        out[direct] = np.exp(-r[direct] * s) * _series(s, 0.5, 1.0, z[direct])
    conn = ~direct
    if np.any(conn):
        # connection form with the powers of e^{-r} folded into the exponentials
        A, B = connection_coeffs(s)
        rc, xc = r[conn], x[conn]
        f1 = _series(s, 0.5, s + 0.5, xc)
        f2 = _series(1 - s, 0.5, 1.5 - s, xc)
        out[conn] = A * np.exp(-rc * s) * f1 + B * np.exp(-rc * (1 - s)) * f2
    return out


def _integrand(spec: KernelSpec, s: complex, r):
    return 2 * math.pi * _f_arr(spec.x_param, r) * np.sinh(r) * _weighted_f(s, r)


def _tail_bound(spec: KernelSpec, s: complex, R: float) -> float:
    # |f| <= 4 X^2 e^{-2r}, sinh r <= e^r / 2, |F| <= |A| + |B| e^{r (2 Re s - 1)} up to a constant
    if abs(s - 0.5) < NEAR_HALF:
        # logarithmic case: e^{-r/2} (1 + r) envelope
        return 2 * math.pi * 4 * spec.x_param ** 2 * (R + 2) * math.exp(-1.5 * R)
    A, B = connection_coeffs(s)
    X = spec.x_param
    sr = s.real
    c1 = abs(A) * math.exp(-R * (1 + sr)) / (1 + sr)
    c2 = abs(B) * math.exp(-R * (2 - sr)) / (2 - sr)
    return 2 * math.pi * 4 * X * X * 0.5 * 2.0 * (c1 + c2)


def h_transform(spec: KernelSpec, t) -> TransformValue:
    t = complex(t)
    if abs(t.imag) > 0.5 + 1e-15:
        raise StripError("|Im t| must not exceed 1/2")
    s = 0.5 + 1j * t
    R = spec.r2 + 40.0
    width = min(0.5, math.pi / (abs(t.real) + 1.0))
    vals = []
    for n in (20, 30):
        r, w = _nodes(spec, R, width, n)
        vals.append(complex(np.dot(w, _integrand(spec, s, r))))
    h = vals[1]
    err = abs(vals[1] - vals[0]) + _tail_bound(spec, s, R)
    if abs(t.real) > 5.0 and t.imag == 0.0:
        h, e2 = _h_split(spec, t, R, width)
        err = max(err, e2)
    return TransformValue(t, h, err)


def _h1_piece(spec: KernelSpec, s: complex, r, w):
    A, _ = connection_coeffs(s)
    x = np.exp(-2.0 * r)
    f = _f_arr(spec.x_param, r)
    return 2 * math.pi * A * np.dot(w, f * np.sinh(r) * np.exp(-r * s) * _series(s, 0.5, s + 0.5, x))


def _h_split(spec: KernelSpec, t: complex, R: float, width: float):
    """h = direct part on [0, r*] + h1(t) + h1(-t) on [r*, R], r* = ln(2)/2."""
    rstar = 0.5 * math.log(2.0)
    s, sm = 0.5 + 1j * t, 0.5 - 1j * t
    out = []
    for n in (20, 30):
        r, w = _nodes(spec, R, width, n)
        lo = r <= rstar
        # panels never straddle r* exactly, so split the rule at the node level
        direct = complex(np.dot(w[lo], _integrand(spec, s, r[lo]))) if np.any(lo) else 0j
        hi = ~lo
        pieces = _h1_piece(spec, s, r[hi], w[hi]) + _h1_piece(spec, sm, r[hi], w[hi])
        out.append(direct + complex(pieces))
    return out[1], abs(out[1] - out[0]) + _tail_bound(spec, s, R)
