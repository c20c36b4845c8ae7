"""Volumes of the bodies S_{M,xi}: membership, Monte Carlo, and the polar closed form.

In polar coordinates ``x omega + y = r e^{i theta}``, ``z = v tan t + u`` the
body becomes a family of planar regions whose area ``B_M(xi, t)`` is a one
dimensional integral in ``phi = theta_M - 2 theta``.  Because ``theta`` runs
over a half turn, ``phi`` covers a full period and the area depends on M only
through its displacement ``ell(M)``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy import integrate

from .modgroup import BasePoint, DegenerateError, GroupElement, angle, coords, xi_from_coords
from .paircorr import f_xi

MC_CHUNK = 1 << 16
_GL_NODES = np.polynomial.legendre.leggauss(24)


class Method(str, enum.Enum):
    MONTE_CARLO = "monte_carlo"
    CLOSED_FORM = "closed_form"


@dataclass(frozen=True)
class RegionSpec:
    omega: BasePoint
    m: GroupElement
    xi: float
    any_matrix: bool = False  # allow M outside the nonnegative cone (symmetry checks)

    def __post_init__(self):
        if self.xi <= 0:
            raise ValueError("xi must be positive")
        a, b, c, d = self.m.as_tuple()
        if not self.any_matrix and (min(a, b, c, d) < 0 or (a, b, c, d) == (1, 0, 0, 1)):
            raise ValueError("M must have nonnegative entries and differ from I")
        if self.oc.T == self.oc.delta:
            raise DegenerateError("M fixes omega; the body is not defined")

    @cached_property
    def oc(self):
        return coords(self.omega, self.m)

    @property
    def x_m(self) -> Fraction:
        return self.oc.X

    @property
    def y_m(self) -> Fraction:
        return self.oc.Y

    @property
    def z_m(self) -> Fraction:
        return self.oc.Z

    @cached_property
    def hyp(self) -> tuple[float, float, float]:
        """(cosh ell, sinh ell, ell) of the displacement of M."""
        T, dl = self.oc.T, self.oc.delta
        ch = float(T / dl)
        sh = math.sqrt(float((T - dl) * (T + dl))) / float(dl)
        return ch, sh, math.asinh(sh)

    @property
    def ell(self) -> float:
        return self.hyp[2]

    @property
    def u_m(self) -> float:
        ch, sh, _ = self.hyp
        return ch / sh

    @property
    def c_m(self) -> float:
        T, dl = self.oc.T, self.oc.delta
        return math.sqrt(float((T - dl) / (T + dl)))

    @property
    def theta_m(self) -> float:
        return angle(self.omega, self.m).theta

    def box(self) -> tuple[tuple[float, float], ...]:
        om = self.omega
        k, v, au = om.k, om.v, abs(float(om.u))
        xmax = 1.0 / (v * math.sqrt(k * (k - au)))
        ymax = math.sqrt(k) / (v * math.sqrt(k - au))
        return (0.0, xmax), (-ymax, ymax), (-k, k)


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    std_error: float
    method: Method
    samples_or_nodes: int
    seed: int | None = None


def _contains_arrays(spec: RegionSpec, x, y, z):
    om = spec.omega
    u, ksq = float(om.u), float(om.ksq)
    xm, ym, zm = float(spec.x_m), float(spec.y_m), float(spec.z_m)
    q1 = x * x * ksq + y * y + 2 * x * y * u
    q2 = x * x * xm + y * y * ym + 2 * x * y * zm
    cap = 1.0 / (ksq + z * z - 2 * u * z)
    nz = (x != 0) | (y != 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        xv = xi_from_coords(om, xm, ym, zm, x, y)
    return nz & (np.abs(xv) <= spec.xi) & (np.maximum(q1, q2) <= cap)


def region_contains(spec: RegionSpec, x: float, y: float, z: float) -> bool:
    if x == 0 and y == 0:
        return False
    return bool(_contains_arrays(spec, np.float64(x), np.float64(y), np.float64(z)))


def _mc_chunk(args):
    spec, seed, j, n = args
    gen = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, j]))
    pts = gen.random((n, 3))
    (x0, x1), (y0, y1), (z0, z1) = spec.box()
    x = x0 + (x1 - x0) * pts[:, 0]
    y = y0 + (y1 - y0) * pts[:, 1]
    z = z0 + (z1 - z0) * pts[:, 2]
    return int(np.count_nonzero(_contains_arrays(spec, x, y, z)))


def vol_mc(spec: RegionSpec, n_samples: int, seed: int, workers: int = 1) -> VolumeEstimate:
    """Hit-or-miss estimate over the box; chunk j draws from Philox keyed by (seed, j)."""
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples")
    nchunks = -(-n_samples // MC_CHUNK)
    jobs = [(spec, seed, j, min(MC_CHUNK, n_samples - j * MC_CHUNK)) for j in range(nchunks)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            hits = list(ex.map(_mc_chunk, jobs))
    else:
        hits = [_mc_chunk(j) for j in jobs]
    h = sum(hits)
    box = np.prod([b - a for a, b in spec.box()])
    p = h / n_samples
    return VolumeEstimate(float(box * p), float(box * math.sqrt(p * (1 - p) / n_samples)),
                          Method.MONTE_CARLO, n_samples, seed)


# --- closed form -------------------------------------------------------------

def _phi_breaks(A: float, B: float, U: float, C: float, sh: float) -> list[float]:
    """Kinks of the phi-integrand on [0, pi]: min switch and the clamp roots."""
    pts = [0.0, math.pi]
    phic = math.acos(-C)
    pts.append(phic)
    s_star = A / (B * sh)
    if s_star < 1.0:
        a1 = math.asin(s_star)
        pts += [a1, math.pi - a1]
    # A (U + cos phi) - B sin phi = 0  <=>  R cos(phi + g) = -A U
    R = math.hypot(A, B)
    g = math.atan2(B, A)
    c0 = -A * U / R
    if -1.0 < c0 < 1.0:
        p1 = math.acos(c0)
        pts += [p1 - g, 2 * math.pi - p1 - g]
    return sorted(min(max(p, 0.0), math.pi) for p in pts)


def _phi_integrand(phi, A, B, U, sh):
    den = U + np.cos(phi)
    num = A * np.minimum(1.0 / sh, den) - B * np.sin(phi)
    return np.maximum(num, 0.0) / den


def _gl(f, a, b):
    x, w = _GL_NODES
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * float(np.dot(w, f(mid + half * x)))


def _adaptive_gl(f, a, b, tol, depth=0):
    whole = _gl(f, a, b)
    m = 0.5 * (a + b)
    left, right = _gl(f, a, m), _gl(f, m, b)
    if abs(left + right - whole) <= tol or depth > 40:
        return left + right
    return _adaptive_gl(f, a, m, tol / 2, depth + 1) + _adaptive_gl(f, m, b, tol / 2, depth + 1)


def _area(spec: RegionSpec, xi_local: float, t: float, tol: float = 1e-10) -> float:
    v = spec.omega.v
    ch, sh, _ = spec.hyp
    U, C = ch / sh, spec.c_m
    A = math.cos(t) ** 2 / (v * v)
    B = v / xi_local
    brk = _phi_breaks(A, B, U, C, sh)
    f = lambda p: _phi_integrand(p, A, B, U, sh)
    total = 0.0
    for lo, hi in zip(brk[:-1], brk[1:]):
        if hi - lo > 1e-15:
            total += _adaptive_gl(f, lo, hi, tol * v)
    return total / (2 * v)


def area_BM(spec: RegionSpec, xi_local: float, t: float) -> float:
    """Area of the polar section at height t, to about 1e-10 absolute."""
    if xi_local <= 0:
        raise ValueError("xi_local must be positive")
    return _area(spec, xi_local, t)


def area_BM_exact(spec: RegionSpec, xi_local: float, t: float) -> float:
    """Same area via elementary antiderivatives on each panel (test oracle)."""
    v = spec.omega.v
    ch, sh, ell = spec.hyp
    U, C = ch / sh, spec.c_m
    A = math.cos(t) ** 2 / (v * v)
    B = v / xi_local
    phic = math.acos(-C)
    brk = _phi_breaks(A, B, U, C, sh)
    total = 0.0
    for lo, hi in zip(brk[:-1], brk[1:]):
        if hi - lo <= 1e-15:
            continue
        mid = 0.5 * (lo + hi)
        if _phi_integrand(mid, A, B, U, sh) <= 0:
            continue
        logs = B * math.log1p(-2.0 * math.sin(0.5 * (hi + lo)) * math.sin(0.5 * (hi - lo)) / (U + math.cos(lo)))
        if mid < phic:
            at = lambda p: math.atan(math.exp(-ell) * math.tan(p / 2)) if p < math.pi else math.pi / 2
            total += 2 * A * (at(hi) - at(lo)) + logs
        else:
            total += A * (hi - lo) + logs
    return total / (2 * v)


def vol_closed(spec: RegionSpec) -> VolumeEstimate:
    om = spec.omega
    v, beta = om.v, om.beta
    lo, hi = beta / 2 - math.pi / 2, beta / 2
    g = lambda t: _area(spec, spec.xi, t, 1e-12) / math.cos(t) ** 2
    val, err = integrate.quad(g, lo, hi, epsabs=1e-10, epsrel=1e-10, limit=200)
    return VolumeEstimate(v * val, 0.0, Method.CLOSED_FORM, 0)


def profile_BM(spec: RegionSpec, xi: float) -> float:
    """B_M(xi) = (pi v / 2) * B_M(v xi / 2, 0)."""
    v = spec.omega.v
    return math.pi * v / 2 * _area(spec, v * xi / 2, 0.0, 1e-13)


def j_intervals(xi: float, ell: float) -> list[tuple[float, float]]:
    """The set J_{xi,M} in [0, pi] as a union of closed intervals."""
    sh, ch = math.sinh(ell), math.cosh(ell)
    U = ch / sh
    if xi >= sh:
        return [(0.0, math.pi)]
    al = math.asin(xi / math.sqrt(xi * xi + 1))
    a1 = math.asin(xi / sh)
    s = math.asin(min(1.0, U * math.sin(al)))
    right = (math.pi + al - s, math.pi)
    if xi >= 2 * math.sinh(ell / 2):
        return [(0.0, a1), (math.pi - a1, al + s), right]
    return [(0.0, a1), right]


def dBM_dxi(spec: RegionSpec) -> float:
    """B'_M at Delta*xi from the J-interval calculus."""
    xi = spec.xi
    _, _, ell = spec.hyp
    U = spec.u_m
    dl = float(spec.omega.delta)
    tot = 0.0
    for a, b in j_intervals(xi, ell):
        # ln(U + cos a) - ln(U + cos b), written to avoid cancellation for short intervals
        tot += math.log1p(-2.0 * math.sin(0.5 * (a + b)) * math.sin(0.5 * (a - b)) / (U + math.cos(b)))
    return math.pi / (2 * dl * dl * xi * xi) * tot


def f_identity_residual(spec: RegionSpec) -> float:
    dl = float(spec.omega.delta)
    ref = math.pi / (dl * dl * spec.xi ** 2) * f_xi(spec.xi, spec.ell)
    return abs(dBM_dxi(spec) - ref)
