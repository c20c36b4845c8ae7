"""Exact arithmetic for PSL(2, Z) acting on a rational base point.

A base point ``omega = u + i v`` is given by the rationals ``u`` and
``ksq = |omega|^2``.  For a group element ``gamma = (a, b; c, d)`` the
coordinates ``X, Y, Z, T`` are quadratic in the entries and stay exact
rationals; angles, distances and the x-intercept are floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Union

RationalLike = Union[int, str, Fraction]


class InvalidElementError(ValueError):
    """Matrix is not in SL(2, Z)."""


class StabilizerError(ValueError):
    """gamma fixes omega, so the angle of omega -> gamma omega is undefined."""


class DegenerateError(ValueError):
    """Zero denominator in Xi_M(c, d)."""


def parse_rational(text: RationalLike) -> Fraction:
    """Parse ``"p/q"`` or ``"n"`` (also plain ints / Fractions) into a Fraction."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        return Fraction(repr(text))
    s = str(text).strip()
    if "/" in s:
        p, q = s.split("/", 1)
        den = int(q)
        if den <= 0:
            raise ValueError(f"denominator must be positive in {text!r}")
        return Fraction(int(p), den)
    return Fraction(s)


@dataclass(frozen=True)
class BasePoint:
    u: Fraction
    ksq: Fraction

    def __post_init__(self):
        object.__setattr__(self, "u", parse_rational(self.u))
        object.__setattr__(self, "ksq", parse_rational(self.ksq))
        if self.ksq <= 0:
            raise ValueError("ksq must be positive")
        if self.vsq <= 0:
            raise ValueError("omega must lie in the upper half plane (ksq > u^2)")

    @property
    def vsq(self) -> Fraction:
        return self.ksq - self.u * self.u

    @property
    def delta(self) -> Fraction:
        """2 v^2; also the value of T at stabilizer elements."""
        return 2 * self.vsq

    @property
    def v(self) -> float:
        return math.sqrt(self.vsq)

    @property
    def k(self) -> float:
        return math.sqrt(self.ksq)

    @property
    def beta(self) -> float:
        """Polar angle of omega, in (0, pi)."""
        return math.atan2(self.v, float(self.u))

    @cached_property
    def scale(self) -> tuple[int, int, int]:
        """Common denominator ``D`` with integers ``un = D u`` and ``kn = D ksq``."""
        den = math.lcm(self.u.denominator, self.ksq.denominator)
        return den, int(self.u * den), int(self.ksq * den)

    def label(self) -> str:
        return f"u={self.u},ksq={self.ksq}"

    @classmethod
    def parse(cls, text: str) -> "BasePoint":
        """Accept the presets ``i`` and ``rho`` or ``u=p/q,ksq=p/q``."""
        s = text.strip()
        if s == "i":
            return cls(Fraction(0), Fraction(1))
        if s == "rho":
            return cls(Fraction(1, 2), Fraction(1))
        try:
            parts = dict(item.split("=", 1) for item in s.split(","))
            u, ksq = parts["u"], parts["ksq"]
        except (KeyError, ValueError) as exc:
            raise ValueError(f"cannot parse base point {text!r}; use i, rho or u=p/q,ksq=p/q") from exc
        return cls(parse_rational(u), parse_rational(ksq))


OMEGA_I = BasePoint(Fraction(0), Fraction(1))
OMEGA_RHO = BasePoint(Fraction(1, 2), Fraction(1))


def stabilizer_order(omega: BasePoint) -> int:
    if omega == OMEGA_I:
        return 2
    if omega == OMEGA_RHO:
        return 3
    return 1


@dataclass(frozen=True, order=True)
class GroupElement:
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.a * self.d - self.b * self.c != 1:
            raise InvalidElementError(f"determinant of {self.as_tuple()} is not 1")
        if not (self.c > 0 or (self.c == 0 and self.a == 1 and self.d == 1)):
            raise InvalidElementError(f"{self.as_tuple()} is not a normalized representative")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return normalize(*matmul(self.as_tuple(), other.as_tuple()))

    def inverse(self) -> "GroupElement":
        return normalize(self.d, -self.b, -self.c, self.a)


def matmul(m, n):
    a, b, c, d = m
    e, f, g, h = n
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def normalize(a: int, b: int, c: int, d: int) -> GroupElement:
    """Canonical representative of ``{+-(a, b, c, d)}`` with c > 0, or c = 0 and a = d = 1."""
    a, b, c, d = int(a), int(b), int(c), int(d)
    if a * d - b * c != 1:
        raise InvalidElementError(f"determinant of {(a, b, c, d)} is not 1")
    if c < 0 or (c == 0 and a < 0):
        a, b, c, d = -a, -b, -c, -d
    return GroupElement(a, b, c, d)


IDENTITY = GroupElement(1, 0, 0, 1)


@dataclass(frozen=True)
class OrbitCoords:
    X: Fraction
    Y: Fraction
    Z: Fraction
    T: Fraction
    delta: Fraction = field(repr=False)

    @property
    def eps_t(self) -> float:
        """e^{-d(omega, gamma omega)} = (T - sqrt(T^2 - Delta^2)) / Delta."""
        t, dl = float(self.T), float(self.delta)
        return dl / (t + math.sqrt(max(t * t - dl * dl, 0.0)))


def coords(omega: BasePoint, g: GroupElement) -> OrbitCoords:
    a, b, c, d = g.as_tuple()
    u, ksq = omega.u, omega.ksq
    X = a * a * ksq + b * b + 2 * a * b * u
    Y = c * c * ksq + d * d + 2 * c * d * u
    Z = a * c * ksq + b * d + u * (a * d + b * c)
    T = X + ksq * Y - 2 * u * Z
    return OrbitCoords(X, Y, Z, T, omega.delta)


def displacement(omega: BasePoint, g: GroupElement) -> tuple[float, Fraction]:
    """Hyperbolic distance d(omega, g omega) and the exact value of its cosh."""
    ch = coords(omega, g).T / omega.delta
    return math.acosh(max(float(ch), 1.0)), ch


@dataclass(frozen=True)
class AngleSample:
    element: GroupElement
    theta: float
    theta_norm: float
    t_norm: Fraction


def normalized_turn(theta: float) -> float:
    """Fractional part of theta / 2 pi, in [0, 1)."""
    x = theta / (2.0 * math.pi)
    x -= math.floor(x)
    return 0.0 if x >= 1.0 else x


def angle_components(omega: BasePoint, oc: OrbitCoords) -> tuple[float, float]:
    """(sin theta, cos theta) of the geodesic omega -> gamma omega."""
    T, dl = oc.T, omega.delta
    if T == dl:
        raise StabilizerError("gamma fixes omega")
    root = math.sqrt(float(T * T - dl * dl))
    s = 2.0 * omega.v * float(oc.Z - omega.u * oc.Y) / root
    c = float(dl * oc.Y - T) / root
    return s, c


def angle(omega: BasePoint, g: GroupElement) -> AngleSample:
    oc = coords(omega, g)
    T, dl = oc.T, omega.delta
    if T == dl:
        raise StabilizerError(f"{g.as_tuple()} fixes omega")
    # atan2 only needs the signs/ratio, so drop the common sqrt(T^2 - Delta^2)
    theta = math.atan2(2.0 * omega.v * float(oc.Z - omega.u * oc.Y), float(dl * oc.Y - T))
    return AngleSample(g, theta, normalized_turn(theta), T)


def phi(omega: BasePoint, g: GroupElement) -> Fraction:
    """Re(gamma omega) = Z / Y, exactly."""
    oc = coords(omega, g)
    return oc.Z / oc.Y


def psi(omega: BasePoint, g: GroupElement) -> float:
    """x-intercept of the oriented geodesic omega -> gamma omega."""
    oc = coords(omega, g)
    if oc.T == omega.delta:
        raise StabilizerError(f"{g.as_tuple()} fixes omega")
    eps = oc.eps_t
    return (float(oc.Z) - float(omega.u) * eps) / (float(oc.Y) - eps)


def xi(omega: BasePoint, m: GroupElement, c: int, d: int) -> Fraction:
    """Phi(gamma) - Phi(gamma M) for any gamma with bottom row (c, d)."""
    mc = coords(omega, m)
    return xi_from_coords(omega, mc.X, mc.Y, mc.Z, Fraction(c), Fraction(d))


def xi_from_coords(omega: BasePoint, xm, ym, zm, c, d):
    """Rational form of Xi_M; also works elementwise on floats or numpy arrays."""
    u, ksq = omega.u, omega.ksq
    if not isinstance(c, Fraction):
        u, ksq, xm, ym, zm = float(u), float(ksq), float(xm), float(ym), float(zm)
    num = c * d * (ksq * ym - xm) + c * c * (ksq * zm - u * xm) + d * d * (u * ym - zm)
    den = (c * c * ksq + d * d + 2 * c * d * u) * (c * c * xm + d * d * ym + 2 * c * d * zm)
    if isinstance(den, Fraction) and den == 0:
        raise DegenerateError(f"Xi_M undefined at (c, d) = ({c}, {d})")
    return num / den
