"""Pair correlation of normalized angles: empirical counts and the series density.

Angles are quantized to integer ticks of size 2^-53 of a full turn so that
the circular window test ``frac(t' - t) <= w`` is an exact integer comparison
and the fast sweep and the quadratic brute force agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .ballenum import BallArrays, BallSpec, Mode, enumerate_arrays, scaled_coords
from .modgroup import AngleSample, BasePoint, GroupElement, stabilizer_order

V_GAMMA = math.pi / 3
TICK_BITS = 53
TURN = 1 << TICK_BITS


# --- the kernel function ---------------------------------------------------

def _f_from_hyp(xi, ch, sh, ell):
    """f_xi given cosh, sinh and ell of the displacement (broadcasting)."""
    xi = np.asarray(xi, dtype=float)
    ch, sh, ell = np.broadcast_arrays(np.asarray(ch, float), np.asarray(sh, float), np.asarray(ell, float))
    xi, ch, sh, ell = np.broadcast_arrays(xi, ch, sh, ell)
    out = np.array(ell, dtype=float, copy=True)
    inside = xi < sh
    if np.any(inside):
        x, c, s = xi[inside], ch[inside], sh[inside]
        w = np.sqrt((s - x) * (s + x))
        b1 = np.log1p(x * x / ((s + w) * (c + w)))
        b2 = np.log((c + s) * (1.0 + x * x)) - 2.0 * np.log(c + w)
        # 2 sinh(l/2)^2 = c - 1, so xi <= 2 sinh(l/2) iff xi^2 <= 2 (c - 1)
        first = x * x <= 2.0 * (c - 1.0)
        out[inside] = np.where(first, b1, b2)
    return out


def f_xi(xi, ell):
    """The kernel f_xi(ell); scalars in give a float back, arrays broadcast."""
    ell_a = np.asarray(ell, dtype=float)
    if np.any(ell_a < 0) or np.any(np.asarray(xi) <= 0):
        raise ValueError("need xi > 0 and ell >= 0")
    r = _f_from_hyp(xi, np.cosh(ell_a), np.sinh(ell_a), ell_a)
    return float(r) if r.ndim == 0 else r


def _hyp_from_scaled(ts, dd):
    """(cosh, sinh, ell) for integer arrays ts = D^2 T and dd = D^2 Delta."""
    ts = np.asarray(ts)
    num_m = (ts - dd).astype(float)
    num_p = (ts + dd).astype(float)
    ddf = float(dd)
    ch = ts.astype(float) / ddf
    sh = np.sqrt(num_m * num_p) / ddf
    ell = np.log1p((num_m + np.sqrt(num_m * num_p)) / ddf)
    return ch, sh, ell


# --- angle samples ---------------------------------------------------------

@dataclass
class AngleArrays:
    """Non-stabilizer elements of a ball with their angles, sorted by (theta_norm, element)."""

    omega: BasePoint
    theta: np.ndarray
    theta_norm: np.ndarray
    ticks: np.ndarray
    t_norm: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    point_key: np.ndarray  # (n, 2) int key (Ys, Zs) identifying gamma*omega
    b_total: int
    n_stabilizer: int

    def __len__(self):
        return len(self.theta)

    def samples(self) -> list[AngleSample]:
        out = []
        for i in range(len(self)):
            g = GroupElement(int(self.a[i]), int(self.b[i]), int(self.c[i]), int(self.d[i]))
            out.append(AngleSample(g, float(self.theta[i]), float(self.theta_norm[i]), float(self.t_norm[i])))
        return out

    def dedup_points(self) -> "AngleArrays":
        """Keep one sample per orbit point gamma*omega (first in sort order)."""
        if len(self) == 0:
            return self
        _, first = np.unique(self.point_key, axis=0, return_index=True)
        keep = np.sort(first)
        sub = {k: getattr(self, k)[keep] for k in
               ("theta", "theta_norm", "ticks", "t_norm", "a", "b", "c", "d", "point_key")}
        return replace(self, **sub)


def angles_from_ball(arr: BallArrays) -> AngleArrays:
    om = arr.omega
    D, un, kn = om.scale
    Xs, Ys, Zs, Ts = arr.scaled_coords()
    stab_ts = 2 * (D * kn - un * un)
    mov = Ts != stab_ts
    n_stab = int(len(Ts) - np.count_nonzero(mov))
    a, b, c, d = arr.a[mov], arr.b[mov], arr.c[mov], arr.d[mov]
    Ys, Zs, Ts = Ys[mov], Zs[mov], Ts[mov]
    # D^3 (Z - uY) and D^3 (Delta Y - T), exact integers with a common positive factor
    n_sin = D * (D * Zs - un * Ys)
    n_cos = stab_ts * Ys - D * Ts
    theta = np.arctan2(2.0 * om.v * np.asarray(n_sin).astype(float), np.asarray(n_cos).astype(float))
    theta = np.where(theta == -math.pi, math.pi, theta)
    tn = theta / (2 * math.pi)
    tn = np.where(tn < 0, tn + 1.0, tn)
    tn = np.where(tn >= 1.0, 0.0, tn)
    ticks = np.floor(tn * TURN).astype(np.int64)
    if len(ticks):
        order = np.lexsort((np.asarray(d), np.asarray(c), np.asarray(b), np.asarray(a), ticks))
    else:
        order = np.zeros(0, dtype=np.int64)
    t_norm = np.asarray(Ts).astype(float) / float(D * D)
    key = np.stack([np.asarray(Ys), np.asarray(Zs)], axis=1) if len(Ys) else np.zeros((0, 2), dtype=np.int64)
    if key.dtype == object:
        # python ints; remap to a dense int64 label for np.unique
        labels = {}
        lab = np.array([labels.setdefault((y, z), len(labels)) for y, z in key.tolist()], dtype=np.int64)
        key = np.stack([lab, np.zeros_like(lab)], axis=1)
    return AngleArrays(om, theta[order], tn[order], ticks[order], t_norm[order],
                       a[order], b[order], c[order], d[order], key[order], len(arr), n_stab)


def angle_arrays(omega: BasePoint, q=None, mode: Mode | str = Mode.FULL, qsq=None, workers: int = 1) -> AngleArrays:
    spec = BallSpec(omega, qsq, Mode(mode)) if qsq is not None else BallSpec.from_q(omega, q, mode)
    return angles_from_ball(enumerate_arrays(spec, workers=workers))


def angle_list(omega: BasePoint, q=None, mode: Mode | str = Mode.FULL, qsq=None) -> tuple[list[AngleSample], int]:
    """Sorted AngleSamples of the ball plus the number of stabilizer elements."""
    arrs = angle_arrays(omega, q, mode, qsq)
    return arrs.samples(), arrs.n_stabilizer


# --- pair counting -----------------------------------------------------------

def _ticks_of(samples) -> np.ndarray:
    if isinstance(samples, AngleArrays):
        return samples.ticks
    if len(samples) and isinstance(samples[0], AngleSample):
        vals = np.array([s.theta_norm for s in samples], dtype=float)
    else:
        vals = np.asarray(samples, dtype=float)
    return np.sort(np.floor(vals * TURN).astype(np.int64))


def _window_ticks(xi: float, b_norm: float) -> int:
    w = xi / b_norm
    if w >= 1.0:
        return TURN
    return int(math.floor(w * TURN))


def pair_counts(ticks: np.ndarray, windows: Sequence[int]) -> np.ndarray:
    """Ordered pairs i != j with (t_j - t_i) mod 2^53 in [0, W], for each W."""
    t = np.sort(np.asarray(ticks, dtype=np.int64))
    n = len(t)
    out = np.zeros(len(windows), dtype=np.int64)
    if n < 2:
        return out
    ext = np.concatenate([t, t + TURN])
    lo = np.searchsorted(ext, t, side="left")
    for j, W in enumerate(windows):
        if W >= TURN:
            out[j] = n * (n - 1)
            continue
        hi = np.searchsorted(ext, t + W, side="right")
        out[j] = int(np.sum(hi - lo)) - n
    return out


def pair_counts_bruteforce(ticks, windows) -> np.ndarray:
    t = np.asarray(ticks, dtype=np.int64)
    n = len(t)
    diff = (t[None, :] - t[:, None]) % TURN
    np.fill_diagonal(diff, TURN)  # never counted unless the window is the full turn
    out = []
    for W in windows:
        out.append(n * (n - 1) if W >= TURN else int(np.count_nonzero(diff <= W)))
    return np.array(out, dtype=np.int64)


def empirical_R2(samples, b_norm: float, xi_grid) -> np.ndarray:
    if b_norm <= 0:
        raise ValueError("b_norm must be positive")
    ticks = _ticks_of(samples)
    wins = [_window_ticks(float(x), b_norm) for x in np.atleast_1d(xi_grid)]
    return pair_counts(ticks, wins) / b_norm


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    b_norm: float

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def empirical_g2(samples, b_norm: float, delta: float, xi_max: float) -> Histogram:
    """Histogram of pair differences.

    Bin j collects differences in (j delta, (j+1) delta], bin 0 also takes the
    zero difference, so cumulative sums reproduce the closed-window R2 counts.
    """
    if delta <= 0:
        raise ValueError("bin width must be positive")
    nb = int(round(xi_max / delta))
    edges = np.arange(nb + 1) * delta
    ticks = _ticks_of(samples)
    wins = [_window_ticks(float(e), b_norm) for e in edges[1:]]
    cum = pair_counts(ticks, wins)
    counts = np.diff(np.concatenate([[0], cum]))
    return Histogram(edges, counts, counts / (b_norm * delta), b_norm)


# --- series side ---------------------------------------------------------------

@dataclass(frozen=True)
class TheorySeriesTerm:
    cosh_ell: Fraction
    multiplicity: int
    f_value: float


@dataclass
class TheorySeries:
    """Displacements of all M with T_M <= t_cut, grouped by exact T."""

    omega: BasePoint
    t_cut: Fraction
    ts: np.ndarray  # D^2 T, ascending, unique
    mult: np.ndarray
    dd: int  # D^2 Delta

    @classmethod
    def build(cls, omega: BasePoint, t_cut, workers: int = 1) -> "TheorySeries":
        t_cut = Fraction(t_cut) if not isinstance(t_cut, float) else Fraction(repr(t_cut))
        if t_cut <= omega.delta:
            raise ValueError("t_cut must exceed Delta")
        arr = enumerate_arrays(BallSpec(omega, t_cut), workers=workers)
        _, _, _, Ts = arr.scaled_coords()
        ts, mult = np.unique(np.asarray(Ts), return_counts=True)
        D = omega.scale[0]
        return cls(omega, t_cut, ts, mult, int(D * D * omega.delta))

    def hyp(self):
        if not hasattr(self, "_hyp"):
            self._hyp = _hyp_from_scaled(self.ts, self.dd)
        return self._hyp

    def terms(self, xi: float) -> list[TheorySeriesTerm]:
        ch, sh, ell = self.hyp()
        f = _f_from_hyp(xi, ch, sh, ell)
        D = self.omega.scale[0]
        return [TheorySeriesTerm(Fraction(int(t), self.dd), int(m), float(v))
                for t, m, v in zip(self.ts.tolist(), self.mult.tolist(), f)]

    @property
    def ell_cut(self) -> float:
        return math.acosh(float(self.t_cut / self.omega.delta))

    def g2(self, x: float) -> tuple[float, float, bool]:
        """(value, tail_bound, truncation_warning) at normalized x."""
        xi = V_GAMMA * x
        ch, sh, ell = self.hyp()
        s = float(np.sum(self.mult * _f_from_hyp(xi, ch, sh, ell)))
        L = self.ell_cut
        tail = (V_GAMMA / math.pi) * 12.0 * math.exp(-L)
        return V_GAMMA / (math.pi * xi * xi) * s, tail, math.sinh(L) <= xi

    def g2_zero(self) -> tuple[float, float]:
        ch, sh, ell = self.hyp()
        pos = ell > 0
        s = float(np.sum(self.mult[pos] / np.expm1(2.0 * ell[pos])))
        tail = (V_GAMMA / math.pi) * 3.0 * math.exp(-self.ell_cut)
        return V_GAMMA / math.pi * s, tail


_SERIES_CACHE: dict = {}


def theory_series(omega: BasePoint, t_cut, workers: int = 1) -> TheorySeries:
    key = (omega, Fraction(repr(t_cut)) if isinstance(t_cut, float) else Fraction(t_cut))
    if key not in _SERIES_CACHE:
        _SERIES_CACHE[key] = TheorySeries.build(omega, key[1], workers)
    return _SERIES_CACHE[key]


@dataclass(frozen=True)
class TheoryValue:
    value: float
    tail_bound: float
    warning: bool


def theoretical_g2(omega: BasePoint, x: float, t_cut) -> TheoryValue:
    if x <= 0:
        raise ValueError("x must be positive")
    return TheoryValue(*theory_series(omega, t_cut).g2(x))


def g2_zero(omega: BasePoint, t_cut) -> TheoryValue:
    val, tail = theory_series(omega, t_cut).g2_zero()
    return TheoryValue(val, tail, False)


# --- grids -------------------------------------------------------------------

@dataclass
class CorrelationGrid:
    xi_values: np.ndarray
    r2_empirical: np.ndarray
    g2_empirical: np.ndarray
    g2_theory: np.ndarray
    tail_bound: np.ndarray
    omega: BasePoint
    q: Fraction
    mode: str
    bin_width: float
    t_cut: Fraction | None
    elliptic: int
    b_norm: float
    n_samples: int
    samples: AngleArrays | None = field(default=None, repr=False)


def correlation_grid(samples: AngleArrays, qsq: Fraction, mode: str, bin_width: float, xi_max: float,
                     t_cut=None, b_norm: float | None = None, elliptic: int = 1) -> CorrelationGrid:
    """Empirical histogram (bin densities, R2 at bin centers) plus theory at bin centers."""
    if b_norm is None:
        b_norm = samples.b_total
    if elliptic != 1:
        if elliptic != stabilizer_order(samples.omega):
            raise ValueError(f"elliptic factor {elliptic} does not match the stabilizer of {samples.omega.label()}")
        samples_used = samples.dedup_points()
        b_norm = b_norm / elliptic
    else:
        samples_used = samples
    hist = empirical_g2(samples_used, b_norm, bin_width, xi_max)
    centers = hist.centers
    r2 = empirical_R2(samples_used, b_norm, centers)
    g2t = np.full(len(centers), np.nan)
    tail = np.full(len(centers), np.nan)
    if t_cut is not None:
        series = theory_series(samples.omega, t_cut)
        for j, x in enumerate(centers):
            val, tb, _ = series.g2(elliptic * x)
            g2t[j], tail[j] = val, tb
    return CorrelationGrid(centers, r2, hist.density, g2t, tail, samples.omega, qsq, str(mode),
                           bin_width, t_cut, elliptic, float(b_norm), len(samples_used), samples)


def elliptic_rescale(grid: CorrelationGrid, e: int) -> CorrelationGrid:
    if e == 1:
        return grid
    if grid.elliptic != 1:
        raise ValueError("grid is already rescaled")
    if e != stabilizer_order(grid.omega):
        raise ValueError(f"elliptic factor {e} does not match the stabilizer of {grid.omega.label()}")
    if grid.samples is None:
        raise ValueError("grid carries no samples to recount")
    xi_max = grid.bin_width * len(grid.xi_values)
    return correlation_grid(grid.samples, grid.q, grid.mode, grid.bin_width, xi_max,
                            grid.t_cut, grid.b_norm, elliptic=e)
