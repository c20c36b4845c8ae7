"""Primitive closed geodesics through the projection of rho = e^{i pi/3}.

A hyperbolic g = (A, B; C, D) with positive entries has its axis through rho
iff D - A = 2(B - C).  Such matrices are parametrized by coprime pairs
(B0, C0) with Delta = B0^2 + C0^2 - B0 C0 and the minimal Pell solution of
T^2 - 4 k^2 Delta = 4.  Lattice points on the open segment (rho -> g rho)
correspond to solutions of t^2 - 4 u^2 Delta = 9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .modgroup import OMEGA_RHO, GroupElement, InvalidElementError, OrbitCoords, coords, normalize


class NotInDomainError(ValueError):
    """Delta is not a discriminant of a geodesic through rho."""


@dataclass(frozen=True)
class PellSolution:
    t_big: int
    k_small: int

    def check(self, delta: int) -> bool:
        return self.t_big ** 2 - 4 * self.k_small ** 2 * delta == 4


@dataclass(frozen=True)
class DiscriminantRecord:
    delta: int
    pairs: frozenset
    pell_min: PellSolution
    nine_solution: Optional[tuple[int, int]]
    class_label: tuple[int, int]
    fibers: int

    @property
    def n_classes(self) -> int:
        return len(self.pairs) // self.fibers


@dataclass(frozen=True)
class GeodesicRep:
    matrix: GroupElement
    delta: int
    source_pair: tuple[int, int]

    def __post_init__(self):
        A, B, C, D = self.matrix.as_tuple()
        if min(A, B, C, D) <= 0:
            raise InvalidElementError("entries must be positive")
        if D - A != 2 * (B - C):
            raise InvalidElementError("axis does not pass through rho")
        if A + D <= 2:
            raise InvalidElementError("matrix is not hyperbolic")


def _is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


def is_axis_through_rho(g: GroupElement) -> bool:
    A, B, C, D = g.as_tuple()
    if abs(A + D) <= 2:
        raise InvalidElementError("not hyperbolic")
    return D - A == 2 * (B - C)


def _cf_convergents(n: int):
    """Convergents (p, q) of sqrt(n) for non-square n, endlessly."""
    a0 = math.isqrt(n)
    m, d, a = 0, 1, a0
    p0, p1 = 1, a0
    q0, q1 = 0, 1
    yield p1, q1
    while True:
        m = d * a - m
        d = (n - m * m) // d
        a = (a0 + m) // d
        p0, p1 = p1, a * p1 + p0
        q0, q1 = q1, a * q1 + q0
        yield p1, q1


def _cf_period(n: int) -> int:
    a0 = math.isqrt(n)
    m, d, a, L = 0, 1, a0, 0
    while True:
        m = d * a - m
        d = (n - m * m) // d
        a = (a0 + m) // d
        L += 1
        if a == 2 * a0:
            return L


def pell_min(delta: int) -> PellSolution:
    """Minimal positive (T, k) with T^2 - 4 k^2 delta = 4, via x^2 - delta y^2 = 1."""
    if delta <= 0 or _is_square(delta):
        raise NotInDomainError(f"{delta} is a square or not positive")
    for p, q in _cf_convergents(delta):
        if p * p - delta * q * q == 1:
            return PellSolution(2 * p, q)


def pell_min_search(delta: int, limit: int = 10**7) -> PellSolution:
    """Incremental search over k with exact square tests (slow reference)."""
    if delta <= 0 or _is_square(delta):
        raise NotInDomainError(f"{delta} is a square or not positive")
    for k in range(1, limit + 1):
        t2 = 4 + 4 * k * k * delta
        if _is_square(t2):
            return PellSolution(math.isqrt(t2), k)
    raise RuntimeError(f"no Pell solution with k <= {limit}")


def nine_solution_search(delta: int, u_max: int) -> Optional[tuple[int, int]]:
    for u in range(1, u_max + 1):
        if u % 3 == 0:
            continue
        t2 = 9 + 4 * u * u * delta
        if _is_square(t2):
            return math.isqrt(t2), u
    return None


def nine_solution(delta: int) -> Optional[tuple[int, int]]:
    """Minimal positive (t, u) with t^2 - 4 u^2 delta = 9 and 3 not dividing u.

    Such solutions have gcd(t, u) = 1, so once 9 < sqrt(4 delta) every one of
    them is a convergent of sqrt(4 delta) (Lagrange); two periods of the
    expansion cover a full orbit of the unit group.  Small delta use the
    direct scan over u <= 3k.
    """
    if delta <= 0 or _is_square(delta):
        raise NotInDomainError(f"{delta} is a square or not positive")
    if 81 >= 4 * delta:
        return nine_solution_search(delta, 3 * pell_min(delta).k_small)
    n = 4 * delta
    steps = 2 * _cf_period(n) + 2
    best = None
    for i, (p, q) in enumerate(_cf_convergents(n)):
        if i > steps:
            break
        if p * p - n * q * q == 9 and q % 3:
            if best is None or p < best[0]:
                best = (p, q)
    return best


def discriminant_pairs(delta: int) -> set[tuple[int, int]]:
    """Coprime positive (B0, C0) with B0^2 + C0^2 - B0 C0 = delta (empty for squares)."""
    out: set[tuple[int, int]] = set()
    if delta < 1 or _is_square(delta):
        return out
    bmax = math.isqrt(4 * delta // 3) + 1
    for B in range(1, bmax + 1):
        disc = 4 * delta - 3 * B * B
        if disc < 0 or not _is_square(disc):
            continue
        r = math.isqrt(disc)
        for num in (B + r, B - r):
            if num > 0 and num % 2 == 0:
                C = num // 2
                if math.gcd(B, C) == 1 and B * B + C * C - B * C == delta:
                    out.add((B, C))
    return out


def in_domain(delta: int) -> bool:
    return bool(discriminant_pairs(delta))


def prime_factors(n: int) -> list[int]:
    ps, p = [], 2
    while p * p <= n:
        if n % p == 0:
            ps.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        ps.append(n)
    return ps


def expected_pair_count(delta: int) -> int:
    nu = sum(1 for p in prime_factors(delta) if p % 3 == 1)
    return 2 ** (1 + nu)


_FIBERS = {(1, 1): 1, (1, 0): 2, (0, 1): 2, (0, 0): 4}


def classify(delta: int) -> DiscriminantRecord:
    pairs = discriminant_pairs(delta)
    if not pairs:
        raise NotInDomainError(f"{delta} is not in D_rho")
    pm = pell_min(delta)
    nine = nine_solution(delta)
    label = (pm.k_small % 2, 0 if nine is not None else 1)
    return DiscriminantRecord(delta, frozenset(pairs), pm, nine, label, _FIBERS[label])


def phi_param(delta: int, b0: int, c0: int) -> GeodesicRep:
    if (b0, c0) not in discriminant_pairs(delta):
        raise NotInDomainError(f"({b0}, {c0}) is not in D_{delta}")
    pm = pell_min(delta)
    h, k = pm.t_big // 2, pm.k_small
    g = GroupElement(h - k * (b0 - c0), k * b0, k * c0, h + k * (b0 - c0))
    rep = GeodesicRep(g, delta, (b0, c0))
    T = pm.t_big
    if coords(OMEGA_RHO, g).T / OMEGA_RHO.delta != Fraction(T * T, 2) - 1:
        raise AssertionError("cosh d(rho, g rho) mismatch")
    return rep


def midpoint_coords(rep: GeodesicRep) -> tuple[Fraction, Fraction, Fraction]:
    A, B, C, D = rep.matrix.as_tuple()
    X = A + Fraction(B, 2)
    Y = D + Fraction(C, 2)
    Z = Fraction(A, 2) + B
    if Z != Fraction(D, 2) + C:
        raise InvalidElementError("inconsistent midpoint data")
    if X * Y - Z * Z != Fraction(3, 4):
        raise InvalidElementError("midpoint fails XY - Z^2 = 3/4")
    return X, Y, Z


# --- segment points ------------------------------------------------------------

def _mul(x, y, delta):
    # (t1 + s1 sqrt D)(t2 + s2 sqrt D)
    return x[0] * y[0] + x[1] * y[1] * delta, x[0] * y[1] + x[1] * y[0]


def _conj(x):
    return x[0], -x[1]


@dataclass(frozen=True)
class SegmentPoint:
    t: int
    u: int
    coords: OrbitCoords
    case: str  # "I" or "II"

    @property
    def cosh_dist(self) -> Fraction:
        return Fraction(self.t, 3)


def _point(delta, b0, c0, t, u, case) -> Optional[SegmentPoint]:
    if (t + 2 * u * (b0 + c0)) % 3:
        return None
    z2 = (t + 2 * u * (b0 + c0)) // 3
    xn, yn = t + u * (2 * c0 - b0), t + u * (2 * b0 - c0)
    if xn % 3 or yn % 3:
        return None
    X, Y, Z = Fraction(xn // 3), Fraction(yn // 3), Fraction(z2, 2)
    if X <= 0 or Y <= 0:
        return None
    T = X + Y - Z  # ksq = 1, u = 1/2 at rho
    return SegmentPoint(t, u, OrbitCoords(X, Y, Z, T, OMEGA_RHO.delta), case)


def segment_points(delta: int, b0: int, c0: int) -> list[SegmentPoint]:
    """Lattice points gamma*rho strictly inside (rho -> g rho), g = phi(B0, C0)."""
    phi_param(delta, b0, c0)
    pm = pell_min(delta)
    T, k = pm.t_big, pm.k_small
    eps = (T // 2, k)  # (t, s) form: t + s sqrt(delta); a point has s = 2u
    eps2 = _mul(eps, eps, delta)
    out: list[SegmentPoint] = []
    if k % 2 == 0:
        p = _point(delta, b0, c0, 3 * T // 2, 3 * k // 2, "I")
        if p is not None:
            out.append(p)
    nine = nine_solution(delta)
    if nine is not None:
        unit = eps if k % 2 == 0 else eps2
        unit_inv = _conj(unit)
        lower = lambda a: a[1] > 0  # alpha > 3
        upper = lambda a: _mul(a, _conj(eps2), delta)[1] < 0  # alpha < 3 eps^2
        seen = set()
        for seed in ((nine[0], 2 * nine[1]), (nine[0], -2 * nine[1])):
            a = seed
            while _mul(a, unit_inv, delta)[1] > 0:
                a = _mul(a, unit_inv, delta)
            while not lower(a):
                a = _mul(a, unit, delta)
            while upper(a):
                if a not in seen and lower(a):
                    seen.add(a)
                    p = _point(delta, b0, c0, a[0], a[1] // 2, "II")
                    if p is not None:
                        out.append(p)
                a = _mul(a, unit, delta)
    out.sort(key=lambda p: p.t)
    return out


def segment_lattice_points(delta: int, b0: int, c0: int) -> list[OrbitCoords]:
    return [p.coords for p in segment_points(delta, b0, c0)]


def segment_points_bruteforce(delta: int, b0: int, c0: int) -> list[tuple[int, int]]:
    """(t, u) of all integral points on the open segment by scanning u (small delta only)."""
    pm = pell_min(delta)
    T, k = pm.t_big, pm.k_small
    tmax = 3 * (T * T // 2 - 1)
    found = []
    u = 1
    while True:
        t2 = 9 + 4 * u * u * delta
        if t2 >= tmax * tmax:
            break
        if _is_square(t2):
            t = math.isqrt(t2)
            if _point(delta, b0, c0, t, u, "") is not None:
                found.append((t, u))
        u += 1
    return found


def elements_at(oc: OrbitCoords) -> list[GroupElement]:
    """All normalized gamma with gamma*rho at the coordinates (X, Y, Z)."""
    Y, Z = oc.Y, oc.Z
    if Y.denominator != 1:
        return []
    y = int(Y)
    out = set()
    cmax = math.isqrt(4 * y // 3) + 1
    for c in range(-cmax, cmax + 1):
        disc = 4 * y - 3 * c * c
        if disc < 0 or not _is_square(disc):
            continue
        r = math.isqrt(disc)
        for dn in (-c + r, -c - r):
            if dn % 2:
                continue
            d = dn // 2
            if c * c + c * d + d * d != y:
                continue
            # a (c + d/2) + b (d + c/2) = Z and a d - b c = 1
            det = -Fraction(y)
            p, q = Fraction(2 * c + d, 2), Fraction(2 * d + c, 2)
            a = (Z * (-c) - q) / det
            b = (p - d * Z) / det
            if a.denominator == 1 and b.denominator == 1:
                g = normalize(int(a), int(b), c, d)
                oc2 = coords(OMEGA_RHO, g)
                if (oc2.X, oc2.Y, oc2.Z) == (oc.X, oc.Y, oc.Z):
                    out.add(g)
    return sorted(out)


def segment_decompositions(delta: int, b0: int, c0: int):
    """For each segment point, the pairs (gamma, gamma') with g = gamma gamma'."""
    g = phi_param(delta, b0, c0).matrix
    res = []
    for p in segment_points(delta, b0, c0):
        pairs = []
        for gam in elements_at(p.coords):
            pairs.append((gam, gam.inverse() @ g))
        res.append((p, pairs))
    return res


# --- conjugacy via indefinite forms ------------------------------------------------

def _rho_step(f, D, sq):
    a, b, c = f
    ac = abs(c)
    # r = -b mod 2c in the normalizing range
    if ac > sq:  # |c| > sqrt(D)
        r = (-b) % (2 * ac)
        if r > ac:
            r -= 2 * ac
    else:
        # sqrt(D) - 2|c| < r < sqrt(D): r is the largest value <= sq with r = -b mod 2|c|
        r = sq - ((sq + b) % (2 * ac))
    return c, r, (r * r - D) // (4 * c)


def _reduced_cycle(f, D):
    sq = math.isqrt(D)
    seen = []
    for _ in range(10000):
        if _is_reduced_strict(f, D):
            break
        f = _rho_step(f, D, sq)
    else:
        raise RuntimeError("reduction did not terminate")
    cyc = [f]
    g = _rho_step(f, D, sq)
    while g != f:
        cyc.append(g)
        g = _rho_step(g, D, sq)
        if len(cyc) > 100000:
            raise RuntimeError("cycle too long")
    return frozenset(cyc)


def _is_reduced_strict(f, D):
    # |sqrt(D) - 2|a|| < b < sqrt(D), tested with exact integer arithmetic
    a, b, c = f
    if b <= 0 or b * b >= D:
        return False
    m = b - 2 * abs(a)  # need |sqrt(D) - 2|a|| < b  <=>  2|a| - b < sqrt(D) < 2|a| + b
    lo, hi = 2 * abs(a) - b, 2 * abs(a) + b
    return (lo < 0 or lo * lo < D) and hi * hi > D


def conjugacy_key(g: GroupElement) -> tuple:
    """Invariant of the PSL2(Z) conjugacy class of a hyperbolic matrix."""
    A, B, C, D = g.as_tuple()
    f = (C, D - A, -B)
    disc = (D - A) ** 2 + 4 * B * C
    return (A + D, _reduced_cycle(f, disc))


def count_classes(reps: list[GroupElement]) -> int:
    return len({conjugacy_key(g) for g in reps})
