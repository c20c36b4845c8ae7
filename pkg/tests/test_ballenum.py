import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latticecorr.ballenum import (
    BallSpec, CapacityError, Mode, ball_stats, count_ball, enumerate_arrays, enumerate_ball, scaled_coords,
)
from latticecorr.modgroup import OMEGA_I, OMEGA_RHO, BasePoint, coords

from conftest import BASE_POINTS

ORACLE_POINTS = [OMEGA_I, OMEGA_RHO, BasePoint(Fraction(1, 3), Fraction(3, 2))]


def entry_cap(om: BasePoint, qsq) -> int:
    """Bound |entry| <= cond(A) Q / v, with A the affine map i -> omega."""
    v, u = om.v, float(om.u)
    A = np.array([[math.sqrt(v), u / math.sqrt(v)], [0.0, 1 / math.sqrt(v)]])
    return int(np.linalg.cond(A) * math.sqrt(float(qsq)) / v) + 1


def brute_force(om: BasePoint, qsq) -> dict:
    """All normalized gamma with T <= qsq, mapped to their exact T, by a plain box scan."""
    qsq = Fraction(qsq)
    E = entry_cap(om, qsq)
    r = np.arange(-E, E + 1)
    out = {}
    for c in range(0, E + 1):
        if c == 0:
            cand = [(1, b, 0, 1) for b in range(-E, E + 1)]
        else:
            A, Dd = np.meshgrid(r, r, indexing="ij")
            A, Dd = A.ravel(), Dd.ravel()
            ok = (A * Dd - 1) % c == 0
            cand = [(int(a), int((a * d - 1) // c), c, int(d)) for a, d in zip(A[ok], Dd[ok])]
        for a, b, cc, d in cand:
            if abs(b) > E:
                continue
            oc = coords(om, _el(a, b, cc, d))
            if oc.T <= qsq:
                out[(a, b, cc, d)] = oc.T
    return out


def _el(*t):
    from latticecorr.modgroup import GroupElement
    return GroupElement(*t)


def as_set(arr):
    return set(zip(arr.a.tolist(), arr.b.tolist(), arr.c.tolist(), arr.d.tolist()))


@pytest.mark.parametrize("om", ORACLE_POINTS, ids=["i", "rho", "generic"])
def test_matches_brute_force_every_radius(om):
    ref = brute_force(om, 200)
    for n in range(1, 201):
        want = {g for g, t in ref.items() if t <= n}
        got = {g.as_tuple() for g in enumerate_ball(BallSpec(om, n))}
        assert got == want, n


@pytest.mark.parametrize("qsq", [Fraction(37, 3), Fraction(101, 7)])
def test_rational_radius(qsq):
    om = ORACLE_POINTS[2]
    ref = {g for g, t in brute_force(om, qsq).items()}
    assert as_set(enumerate_arrays(BallSpec(om, qsq))) == ref


def test_workers_do_not_change_output():
    spec = BallSpec(OMEGA_RHO, 900)
    a1 = enumerate_arrays(spec, workers=1)
    a3 = enumerate_arrays(spec, workers=3)
    for k in "abcd":
        assert np.array_equal(getattr(a1, k), getattr(a3, k))


def test_sorted_by_c_d_a():
    arr = enumerate_arrays(BallSpec(OMEGA_I, 500))
    keys = list(zip(arr.c.tolist(), arr.d.tolist(), arr.a.tolist()))
    assert keys == sorted(keys)


@given(st.sampled_from(BASE_POINTS), st.integers(2, 400))
@settings(max_examples=25)
def test_modes_partition(om, qsq):
    full = enumerate_arrays(BallSpec(om, qsq))
    inner = enumerate_arrays(BallSpec(om, qsq, Mode.HALF_INNER))
    outer = enumerate_arrays(BallSpec(om, qsq, Mode.HALF_OUTER))
    st_ = ball_stats(full)
    assert len(inner) == st_.b_inner and len(outer) == st_.b_outer
    assert as_set(inner) | as_set(outer) <= as_set(full)
    assert not (as_set(inner) & as_set(outer))
    assert st_.b_inner + st_.b_outer + st_.b_boundary == st_.b_total == len(full)


@given(st.sampled_from(BASE_POINTS), st.integers(1, 300))
@settings(max_examples=25)
def test_ball_invariants(om, qsq):
    arr = enumerate_arrays(BallSpec(om, qsq))
    D = om.scale[0]
    Xs, Ys, Zs, Ts = arr.scaled_coords()
    # XY - Z^2 = v^2 and T <= Q^2, both exact
    assert np.all(Xs * Ys - Zs * Zs == int(D * D * om.vsq))
    assert np.all(Ts <= D * D * qsq)
    # normalization: c > 0, or c = 0 with a = d = 1; determinant one
    assert np.all((arr.c > 0) | ((arr.c == 0) & (arr.a == 1) & (arr.d == 1)))
    assert np.all(arr.a * arr.d - arr.b * arr.c == 1)


def test_stabilizer_counts():
    assert ball_stats(enumerate_arrays(BallSpec(OMEGA_I, 10))).b_stabilizer == 2
    assert ball_stats(enumerate_arrays(BallSpec(OMEGA_RHO, 10))).b_stabilizer == 3
    assert ball_stats(enumerate_arrays(BallSpec(ORACLE_POINTS[2], 10))).b_stabilizer == 1


def test_monotone_in_radius():
    counts = [count_ball(BallSpec(OMEGA_RHO, n)).b_total for n in range(1, 60)]
    assert counts == sorted(counts)


def test_capacity_error():
    with pytest.raises(CapacityError):
        enumerate_arrays(BallSpec(OMEGA_I, 10**6), capacity=1000)


def test_big_entries_use_exact_integers():
    om = BasePoint(Fraction(1, 997), Fraction(1000, 991))
    arr = enumerate_arrays(BallSpec(om, 50))
    D = om.scale[0]
    Xs, Ys, Zs, Ts = scaled_coords(om, arr.a, arr.b, arr.c, arr.d)
    assert all(int(x) * int(y) - int(z) ** 2 == D * D * om.vsq for x, y, z in zip(Xs, Ys, Zs))
    assert as_set(arr) == set(brute_force(om, 50))


def test_invalid_radius():
    with pytest.raises(ValueError):
        BallSpec(OMEGA_I, 0)
