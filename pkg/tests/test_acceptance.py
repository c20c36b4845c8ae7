"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line (with the
measured quantities) and then asserts the criterion, runtime included.
"""

import json
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from latticecorr.ballenum import BallSpec, Mode, ball_stats, enumerate_arrays, enumerate_ball
from latticecorr.cli import main as cli_main
from latticecorr.geodesics_rho import (
    classify, discriminant_pairs, expected_pair_count, in_domain, phi_param, segment_points,
)
from latticecorr.modgroup import OMEGA_I, OMEGA_RHO, BasePoint, GroupElement, coords, normalize, phi, xi
from latticecorr.paircorr import (
    angle_arrays, correlation_grid, empirical_R2, f_xi, pair_counts_bruteforce, theoretical_g2, TURN,
    _window_ticks,
)
from latticecorr.selberg import KernelSpec, h_transform
from latticecorr.volumes import RegionSpec, dBM_dxi, f_identity_residual, profile_BM, vol_closed, vol_mc

from conftest import BASE_POINTS, random_element
from test_ballenum import brute_force

SEED = 20240611  # fixed before any run; Monte Carlo checks use it as is


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail, elapsed):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f}s]")
        return ok
    return _report


def test_criterion_01_exact_identities(report):
    t0 = time.perf_counter()
    rng = random.Random(SEED)
    bad = 0
    for om in BASE_POINTS:
        n = 0
        while n < 1000:
            g, m = random_element(rng), random_element(rng)
            gm = normalize(*(g @ m).as_tuple())
            if coords(om, g).Y == 0 or coords(om, gm).Y == 0:
                continue
            bad += phi(om, g) - phi(om, gm) != xi(om, m, g.c, g.d)
            n += 1
    n_el = 0
    for om in BASE_POINTS:
        arr = enumerate_arrays(BallSpec(om, 2000))
        Xs, Ys, Zs, _ = arr.scaled_coords()
        D = om.scale[0]
        bad += int(np.count_nonzero(Xs * Ys - Zs * Zs != int(D * D * om.vsq)))
        n_el += len(arr)
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 5
    report(1, ok, f"5000 Lemma-1 pairs and {n_el} elements, {bad} failures", dt)
    assert ok


def test_criterion_02_enumeration_oracle(report):
    t0 = time.perf_counter()
    points = [OMEGA_I, OMEGA_RHO, BasePoint(Fraction(1, 3), Fraction(3, 2))]
    mismatches = 0
    for om in points:
        ref = brute_force(om, 200)
        for n in range(1, 201):
            want = {g for g, t in ref.items() if t <= n}
            got = {g.as_tuple() for g in enumerate_ball(BallSpec(om, n))}
            mismatches += got != want
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 30
    report(2, ok, f"600 balls (Q^2 = 1..200 at 3 points), {mismatches} mismatches", dt)
    assert ok


def test_criterion_03_counting(report):
    t0 = time.perf_counter()
    Q = 300
    st = ball_stats(enumerate_arrays(BallSpec(OMEGA_I, Q * Q)))
    ratio = st.b_total / Q ** 2
    half = st.b_inner / st.b_total
    dt = time.perf_counter() - t0
    ok = 2.7 <= ratio <= 3.3 and abs(half - 0.5) < 0.02 and dt < 10
    report(3, ok, f"B_tot/Q^2 = {ratio:.4f}, B/B_tot = {half:.4f}", dt)
    assert ok


def test_criterion_04_pair_counting(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    pool = angle_arrays(OMEGA_I, qsq=40_000).ticks
    bad = 0
    for k in range(20):
        n = int(rng.integers(2, 2001))
        if k % 2:
            ticks = rng.choice(pool, size=n, replace=False)  # lattice angles, with repeats
        else:
            ticks = rng.integers(0, TURN, size=n)
        b = float(rng.uniform(0.5, 2.0) * n)
        grid = np.linspace(0.05, 4.0, 15)
        fast = empirical_R2(np.sort(ticks) / TURN, b, grid) * b
        brute = pair_counts_bruteforce(np.sort(ticks), [_window_ticks(x, b) for x in grid])
        bad += not np.array_equal(np.rint(fast).astype(np.int64), brute)
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 10
    report(4, ok, f"20 sample sets, {bad} mismatches", dt)
    assert ok


def test_criterion_05_kernel(report):
    t0 = time.perf_counter()
    jump = 0.0
    for ell in (0.3, 1.0, 2.0, 5.0):
        c, s = math.cosh(ell), math.sinh(ell)
        x = 2 * math.sinh(ell / 2)
        w = math.sqrt((s - x) * (s + x))
        jump = max(jump, abs(math.log1p(x * x / ((s + w) * (c + w)))
                             - (math.log((c + s) * (1 + x * x)) - 2 * math.log(c + w))))
        jump = max(jump, abs(math.log((c + s) * (1 + s * s)) - 2 * math.log(c) - ell))
        # the implementation on adjacent floats around the first breakpoint; at xi = sinh(ell) the
        # square root makes a one-ulp step move f by ~sqrt(ulp), so only the formulas are compared there
        jump = max(jump, abs(f_xi(np.nextafter(x, np.inf), ell) - f_xi(np.nextafter(x, 0), ell)))
    rel = max(abs(f_xi(1e-4, ell) / 1e-8 * math.expm1(2 * ell) - 1) for ell in (0.5, 1.0, 3.0))
    dt = time.perf_counter() - t0
    ok = jump < 1e-12 and rel < 1e-6 and dt < 1
    report(5, ok, f"max jump {jump:.2e}, small-xi rel err {rel:.2e}", dt)
    assert ok


VOL_MATRICES = [(1, 1, 0, 1), (1, 0, 1, 1), (2, 1, 1, 1), (1, 2, 0, 1), (1, 1, 1, 2),
                (3, 2, 1, 1), (2, 3, 1, 2), (1, 4, 0, 1), (5, 2, 2, 1), (8, 3, 5, 2)]


def _xi_values(ell):
    """Ten xi values covering the three J-regimes, kept 5% away from the breakpoints."""
    b1, b2 = 2 * math.sinh(ell / 2), math.sinh(ell)
    lo = list(np.linspace(0.1, 0.95, 4) * b1)
    mid = list(b1 + (b2 - b1) * np.linspace(0.1, 0.9, 3)) if b2 > 1.1 * b1 else list(np.linspace(0.2, 0.9, 3) * b1)
    hi = list(np.array([1.05, 1.5, 3.0]) * b2)
    return lo + mid + hi


def test_criterion_06_derivative_identity(report):
    t0 = time.perf_counter()
    worst_id, worst_fd, regimes = 0.0, 0.0, set()
    for om in (OMEGA_I,):
        dl = float(om.delta)
        for m in VOL_MATRICES:
            ell = RegionSpec(om, GroupElement(*m), 1.0).ell
            for x in _xi_values(ell):
                sp = RegionSpec(om, GroupElement(*m), float(x))
                regimes.add(0 if x < 2 * math.sinh(ell / 2) else (1 if x < math.sinh(ell) else 2))
                worst_id = max(worst_id, f_identity_residual(sp))
                h = 1e-6 * dl * x
                fd = (profile_BM(sp, dl * x + h) - profile_BM(sp, dl * x - h)) / (2 * h)
                worst_fd = max(worst_fd, abs(fd / dBM_dxi(sp) - 1))
    dt = time.perf_counter() - t0
    ok = worst_id < 1e-12 and worst_fd < 1e-4 and regimes == {0, 1, 2} and dt < 30
    report(6, ok, f"identity residual {worst_id:.2e}, finite-difference rel {worst_fd:.2e}, regimes {sorted(regimes)}", dt)
    assert ok


def _rho_partner(m):
    w = GroupElement(1, -1, 1, 0)
    return normalize(*(w @ GroupElement(*m) @ w @ w).as_tuple())


def test_criterion_07_volume_oracle(report):
    t0 = time.perf_counter()
    worst_z, worst_sym = 0.0, 0.0
    s = GroupElement(0, -1, 1, 0)
    for om in (OMEGA_I, OMEGA_RHO):
        for m in VOL_MATRICES:
            sp = RegionSpec(om, GroupElement(*m), 1.0)
            mc, cl = vol_mc(sp, 10**6, SEED), vol_closed(sp)
            worst_z = max(worst_z, abs(mc.value - cl.value) / mc.std_error)
            if om == OMEGA_I:
                other = normalize(*(GroupElement(*m) @ s).as_tuple())
            else:
                other = _rho_partner(m)
            sym = vol_closed(RegionSpec(om, other, 1.0, any_matrix=True)).value
            worst_sym = max(worst_sym, abs(sym - cl.value))
    dt = time.perf_counter() - t0
    ok = worst_z <= 3 and worst_sym < 1e-8 and dt < 300
    report(7, ok, f"max |mc - closed|/sigma = {worst_z:.2f}, symmetry diff {worst_sym:.1e}", dt)
    assert ok


def _figure_mad(Q):
    arr = angle_arrays(OMEGA_I, qsq=Q * Q)
    g = correlation_grid(arr, Fraction(Q * Q), "full", 0.1, 3.0, t_cut=100_000, elliptic=2)
    sel = g.xi_values > 0.1
    return float(np.mean(np.abs(g.g2_empirical - g.g2_theory)[sel]))


def test_criterion_08_figure(report):
    t0 = time.perf_counter()
    mad_300 = _figure_mad(300)
    mad_1000 = _figure_mad(1000)
    dt = time.perf_counter() - t0
    ok = mad_1000 < 0.10 and mad_1000 < mad_300 and dt < 600
    report(8, ok, f"MAD(Q=1000) = {mad_1000:.4f}, MAD(Q=300) = {mad_300:.4f}", dt)
    assert ok


def test_criterion_09_limit(report):
    t0 = time.perf_counter()
    v = theoretical_g2(OMEGA_I, 20.0, 100_000)
    dt = time.perf_counter() - t0
    ok = 0.95 <= v.value <= 1.05 and dt < 120
    report(9, ok, f"g2(20) = {v.value:.4f} (tail estimate {v.tail_bound:.1e})", dt)
    assert ok


def test_criterion_10_golden(report):
    t0 = time.perf_counter()
    pm = {3: (4, 1), 7: (16, 3), 13: (1298, 180), 21: (110, 12)}
    pairs = {3: {(2, 1), (1, 2)}, 7: {(3, 1), (3, 2), (1, 3), (2, 3)},
             13: {(4, 1), (4, 3), (1, 4), (3, 4)}, 21: {(5, 1), (5, 4), (1, 5), (4, 5)}}
    labels = {3: (1, 1), 7: (1, 0), 13: (0, 0), 21: (0, 1)}
    counts = {3: 0, 7: 1, 13: 3, 21: 1}
    fails = []
    for d in (3, 7, 13, 21):
        r = classify(d)
        if (r.pell_min.t_big, r.pell_min.k_small) != pm[d]:
            fails.append(f"pell {d}")
        if set(r.pairs) != pairs[d]:
            fails.append(f"pairs {d}")
        if r.class_label != labels[d]:
            fails.append(f"label {d}")
        if any(len(segment_points(d, *p)) != counts[d] for p in r.pairs):
            fails.append(f"segment {d}")
    if phi_param(3, 2, 1).matrix.as_tuple() != (1, 2, 1, 3):
        fails.append("phi(2,1)")
    if phi_param(13, 4, 1).matrix.as_tuple() != (109, 720, 180, 1189):
        fails.append("phi(4,1)")
    dom = [d for d in range(1, 501) if in_domain(d)]
    law = sum(len(discriminant_pairs(d)) != expected_pair_count(d) for d in dom)
    if law:
        fails.append(f"cardinality law fails for {law} discriminants")
    dt = time.perf_counter() - t0
    ok = not fails and dt < 30
    report(10, ok, f"{len(dom)} discriminants <= 500 checked; failures: {fails or 'none'}", dt)
    assert ok


def test_criterion_11_transform(report):
    t0 = time.perf_counter()
    rel = max(abs(h_transform(KernelSpec(X), 0.5j).h / (math.pi * X * X) - 1) for X in (0.5, 2.0, 10.0))
    sp = KernelSpec(2.0)
    even = max(abs(h_transform(sp, t).h - h_transform(sp, -t).h) for t in (0.5, 3.0, 17.0))
    ref = 100 * abs(h_transform(sp, 10.0).h)
    decay = max(t * t * abs(h_transform(sp, t).h) / ref for t in np.arange(10.0, 101.0, 10.0))
    dt = time.perf_counter() - t0
    ok = rel < 1e-6 and even < 1e-8 and decay <= 5 and dt < 120
    report(11, ok, f"h(i/2) rel err {rel:.1e}, evenness {even:.1e}, decay ratio {decay:.2f}", dt)
    assert ok


def _cli_bytes(tmp_path, name, argv):
    out = tmp_path / name
    assert cli_main([*argv, "--out", str(out)]) == 0
    return out.read_bytes()


def test_criterion_12_determinism(report, tmp_path):
    t0 = time.perf_counter()
    same = True
    fig = ["compare", "--omega", "i", "--q", "1000", "--elliptic", "2", "--bin-width", "0.1", "--xi-max", "3",
           "--t-cut", "100000"]
    same &= _cli_bytes(tmp_path, "f1.csv", fig + ["--threads", "1"]) == _cli_bytes(tmp_path, "f8.csv", fig + ["--threads", "8"])
    for om in ("i", "rho"):
        vol = ["volumes", "--omega", om, "--xi", "1.0", "--samples", "1000000", "--seed", str(SEED), "--emit", "csv"]
        for m in VOL_MATRICES:
            vol += ["--m", ",".join(map(str, m))]
        same &= _cli_bytes(tmp_path, f"{om}1.csv", vol + ["--threads", "1"]) == \
            _cli_bytes(tmp_path, f"{om}8.csv", vol + ["--threads", "8"])
    dt = time.perf_counter() - t0
    report(12, same, "compare (Q=1000) and volumes CSVs, 1 vs 8 workers: " + ("identical" if same else "differ"), dt)
    assert same
