"""Enumeration of PSL(2, Z) elements in hyperbolic balls ``T <= Q^2``.

Elements are stratified by the lower-left entry ``c``.  For ``c >= 1`` and a
coprime ``d`` the entry ``a`` runs over ``d^{-1} mod c`` and ``b = (ad-1)/c``;
``T`` is then a quadratic in ``a``, so the admissible ``a`` form an interval
which is located in floating point and confirmed with exact integer tests.

All exact tests use the integer scalings ``Xs = D X``, ``Ys = D Y``,
``Zs = D Z`` and ``Ts = D^2 T`` where ``D`` is the common denominator of
``u`` and ``ksq``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .modgroup import BasePoint, GroupElement, RationalLike, parse_rational

DEFAULT_CAPACITY = 40_000_000
_INT64_SAFE = 2**62


class CapacityError(RuntimeError):
    """The projected number of elements exceeds the memory budget."""


class Mode(str, enum.Enum):
    FULL = "full"
    HALF_INNER = "half_inner"
    HALF_OUTER = "half_outer"


def _as_qsq(q=None, qsq=None) -> Fraction:
    if qsq is not None:
        return parse_rational(qsq)
    if isinstance(q, float):
        q = Fraction(repr(q))
    q = parse_rational(q)
    return q * q


@dataclass(frozen=True)
class BallSpec:
    omega: BasePoint
    qsq: Fraction
    mode: Mode = Mode.FULL

    def __post_init__(self):
        object.__setattr__(self, "qsq", parse_rational(self.qsq))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.qsq <= 0:
            raise ValueError("Q^2 must be positive")

    @classmethod
    def from_q(cls, omega: BasePoint, q: RationalLike | float, mode: Mode | str = Mode.FULL) -> "BallSpec":
        """Ball ``||gamma|| <= q``; a float q is read through its decimal repr."""
        return cls(omega, _as_qsq(q=q), Mode(mode))

    @property
    def q(self) -> float:
        return math.sqrt(self.qsq)

    def entry_bounds(self) -> tuple[int, int, int]:
        """Integer bounds on |a|, |d|; |b|; |c| (inequality (4.4) plus a margin)."""
        om = self.omega
        k, v, au = om.k, om.v, abs(float(om.u))
        q = self.q
        ad = q * math.sqrt(k) / (v * math.sqrt(k - au))
        bb = ad * k
        cc = q / (v * math.sqrt(k * (k - au)))
        return int(ad) + 2, int(bb) + 2, int(cc) + 2

    def projected_count(self) -> float:
        return 6.0 * float(self.qsq) / float(self.omega.delta) * 1.2 + 100


@dataclass(frozen=True)
class BallStats:
    b_total: int
    b_inner: int
    b_outer: int
    b_boundary: int
    b_stabilizer: int


@dataclass
class BallArrays:
    """Struct-of-arrays form of a ball, sorted by (c, d, a)."""

    omega: BasePoint
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __len__(self) -> int:
        return len(self.a)

    def scaled_coords(self):
        """Exact (Xs, Ys, Zs, Ts) arrays with X = Xs/D, ..., T = Ts/D^2."""
        return scaled_coords(self.omega, self.a, self.b, self.c, self.d)

    def elements(self) -> Iterator[GroupElement]:
        for row in zip(self.a.tolist(), self.b.tolist(), self.c.tolist(), self.d.tolist()):
            yield GroupElement(*row)


def scaled_coords(omega: BasePoint, a, b, c, d):
    D, un, kn = omega.scale
    Xs = a * a * kn + b * b * D + 2 * a * b * un
    Ys = c * c * kn + d * d * D + 2 * c * d * un
    Zs = a * c * kn + b * d * D + un * (a * d + b * c)
    Ts = D * Xs + kn * Ys - 2 * un * Zs
    return Xs, Ys, Zs, Ts


def _use_int64(spec: BallSpec) -> bool:
    D, un, kn = spec.omega.scale
    ea, eb, ec = spec.entry_bounds()
    e = max(ea, eb, ec) + 1
    coef = max(D, abs(un), kn)
    xs = 4 * e * e * coef
    ts = 4 * xs * coef
    qs = spec.qsq
    return max(ts * qs.denominator, D * D * qs.numerator, xs * kn * 4) < _INT64_SAFE


def _mode_mask(spec: BallSpec, Xs, Ys):
    D, un, kn = spec.omega.scale
    lhs, rhs = D * Xs, kn * Ys
    if spec.mode is Mode.HALF_INNER:
        return lhs < rhs
    if spec.mode is Mode.HALF_OUTER:
        return lhs > rhs
    return None


def _c_zero(spec: BallSpec, dtype):
    # (1, b, 0, 1): T = Delta + b^2
    rest = spec.qsq - spec.omega.delta
    if rest < 0:
        return [np.zeros(0, dtype=dtype)] * 4
    bmax = math.isqrt(rest.numerator // rest.denominator)
    b = np.arange(-bmax, bmax + 1, dtype=np.int64).astype(dtype)
    one = np.ones_like(b)
    return [one, b, np.zeros_like(b), one]


def _row_c(spec: BallSpec, c: int, dtype):
    """All elements of the ball with lower-left entry c >= 1."""
    om = spec.omega
    D, un, kn = om.scale
    u, ksq = float(om.u), float(om.ksq)
    qsq_f = float(spec.qsq)
    vsq = float(om.vsq)
    # T >= v^2 Y, so c^2 ksq + d^2 + 2cdu <= Q^2 / v^2
    ylim = qsq_f / vsq * (1 + 1e-9) + 1e-9
    disc = (u * u - ksq) * c * c + ylim
    if disc < 0:
        return None
    root = math.sqrt(disc)
    dlo = math.floor(-c * u - root) - 1
    dhi = math.ceil(-c * u + root) + 1
    d = np.arange(dlo, dhi + 1, dtype=np.int64)
    d = d[np.gcd(d, c) == 1]
    if len(d) == 0:
        return None
    if c == 1:
        a0 = np.zeros_like(d)
    else:
        inv = {r: pow(r, -1, c) for r in np.unique(d % c).tolist()}
        a0 = np.array([inv[r] for r in (d % c).tolist()], dtype=np.int64)
    # T(a) = alpha a^2 + beta a + gamma with b = (a d - 1)/c, evaluated in floats
    df = d.astype(float)

    def t_of(af):
        bf = (af * df - 1.0) / c
        X = af * af * ksq + bf * bf + 2 * af * bf * u
        Y = c * c * ksq + df * df + 2 * c * df * u
        Z = af * c * ksq + bf * df + u * (af * df + bf * c)
        return X + ksq * Y - 2 * u * Z

    t0, tp, tm = t_of(0.0), t_of(1.0), t_of(-1.0)
    alpha = (tp + tm) / 2 - t0
    beta = (tp - tm) / 2
    gamma = t0 - qsq_f
    dis = beta * beta - 4 * alpha * gamma
    ok = dis >= -1e-9 * (beta * beta + abs(4 * alpha * gamma)) - 1e-9
    if not ok.any():
        return None
    d, a0, alpha, beta, dis = d[ok], a0[ok], alpha[ok], beta[ok], np.maximum(dis[ok], 0.0)
    sq = np.sqrt(dis)
    r1 = (-beta - sq) / (2 * alpha)
    r2 = (-beta + sq) / (2 * alpha)
    pad = 1e-7 * (1 + np.abs(r1) + np.abs(r2))
    lo = r1 - pad
    hi = r2 + pad
    # first/last a = a0 (mod c) in [lo, hi], widened by one step each side
    jlo = np.floor((lo - a0) / c).astype(np.int64)
    jhi = np.ceil((hi - a0) / c).astype(np.int64)
    n = jhi - jlo + 1
    n = np.maximum(n, 0)
    if n.sum() == 0:
        return None
    idx = np.repeat(np.arange(len(d)), n)
    offs = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
    a = a0[idx] + (jlo[idx] + offs) * c
    dd = d[idx]
    if dtype is object:
        a = a.astype(object)
        dd = dd.astype(object)
    b = (a * dd - 1) // c
    cc = np.full(len(a), c, dtype=np.int64)
    if dtype is object:
        cc = cc.astype(object)
    return a, b, cc, dd


def _shard(spec: BallSpec, cs: list[int], dtype) -> tuple[np.ndarray, ...]:
    D, un, kn = spec.omega.scale
    qn, qd = spec.qsq.numerator, spec.qsq.denominator
    parts = []
    for c in cs:
        rows = _c_zero(spec, dtype) if c == 0 else _row_c(spec, c, dtype)
        if rows is None or len(rows[0]) == 0:
            continue
        a, b, cc, d = rows
        Xs, Ys, Zs, Ts = scaled_coords(spec.omega, a, b, cc, d)
        keep = Ts * qd <= D * D * qn
        mm = _mode_mask(spec, Xs, Ys)
        if mm is not None:
            keep &= mm
        keep = keep.astype(bool)
        if keep.any():
            parts.append(tuple(x[keep] for x in (a, b, cc, d)))
    if not parts:
        return tuple(np.zeros(0, dtype=np.int64 if dtype is not object else object) for _ in range(4))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))


def _shard_job(args):
    spec, cs, dtype_name = args
    return _shard(spec, cs, object if dtype_name == "object" else np.int64)


def enumerate_arrays(spec: BallSpec, workers: int = 1, capacity: int = DEFAULT_CAPACITY) -> BallArrays:
    """Materialize the ball as arrays sorted by (c, d, a).

    Shards are residue classes of ``c`` modulo ``workers``; the merged, sorted
    output does not depend on the number of workers.
    """
    if spec.projected_count() > capacity:
        raise CapacityError(
            f"projected {spec.projected_count():.3g} elements exceeds capacity {capacity}"
        )
    cmax = spec.entry_bounds()[2]
    dtype_name = "int64" if _use_int64(spec) else "object"
    workers = max(1, int(workers))
    shards = [list(range(r, cmax + 1, workers)) for r in range(workers)]
    jobs = [(spec, cs, dtype_name) for cs in shards if cs]
    if workers == 1:
        results = [_shard_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_shard_job, jobs))
    a, b, c, d = (np.concatenate([r[i] for r in results]) for i in range(4))
    if dtype_name == "int64":
        order = np.lexsort((a, d, c))
    else:
        order = np.array(sorted(range(len(a)), key=lambda i: (c[i], d[i], a[i])), dtype=np.int64)
    return BallArrays(spec.omega, a[order], b[order], c[order], d[order])


def enumerate_ball(spec: BallSpec) -> Iterator[GroupElement]:
    """Stream the normalized elements of the ball, one ``c`` stratum at a time."""
    if spec.projected_count() > DEFAULT_CAPACITY:
        raise CapacityError(f"projected {spec.projected_count():.3g} elements exceeds capacity")
    cmax = spec.entry_bounds()[2]
    dtype = np.int64 if _use_int64(spec) else object
    for c in range(cmax + 1):
        a, b, cc, d = _shard(spec, [c], dtype)
        order = sorted(range(len(a)), key=lambda i: (d[i], a[i]))
        for i in order:
            yield GroupElement(int(a[i]), int(b[i]), int(cc[i]), int(d[i]))


def count_ball(spec: BallSpec, workers: int = 1) -> BallStats:
    full = BallSpec(spec.omega, spec.qsq, Mode.FULL)
    arr = enumerate_arrays(full, workers=workers)
    return ball_stats(arr)


def ball_stats(arr: BallArrays) -> BallStats:
    om = arr.omega
    D, un, kn = om.scale
    Xs, Ys, Zs, Ts = arr.scaled_coords()
    lhs, rhs = D * Xs, kn * Ys
    inner = int(np.count_nonzero(lhs < rhs))
    outer = int(np.count_nonzero(lhs > rhs))
    stab_ts = 2 * (D * kn - un * un)
    stab = int(np.count_nonzero(Ts == stab_ts))
    n = len(arr)
    return BallStats(n, inner, outer, n - inner - outer, stab)
