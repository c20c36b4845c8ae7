"""Command line front end.

Every CSV starts with one ``# {json}`` line holding the resolved run
configuration; wall time and library versions go to ``<out>.meta.json`` so
that reruns produce byte-identical CSV files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
import scipy

from . import __version__
from .ballenum import BallSpec, CapacityError, Mode, ball_stats, enumerate_arrays
from .modgroup import BasePoint, GroupElement, InvalidElementError, stabilizer_order
from .paircorr import angle_arrays, correlation_grid, theory_series
from .volumes import RegionSpec, dBM_dxi, f_identity_residual, vol_closed, vol_mc
from . import geodesics_rho as geo
from .selberg import KernelSpec, h_transform

EXIT_OK, EXIT_USAGE, EXIT_CAPACITY = 0, 2, 3

DEFAULTS: dict[str, Any] = {
    "omega": "i",
    "threads": 1,
    "seed": 0,
    "mode": "full",
    "emit": None,
    "bin_width": 0.05,
    "xi_max": 4.0,
    "t_cut": "100000",
    "elliptic": 1,
    "method": "both",
    "samples": 1_000_000,
}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.12g" % x


def _rational(text) -> Fraction:
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad rational literal {text!r}") from exc


def _grid(text: str) -> np.ndarray:
    """start:stop:step, stop included when it lies on the grid."""
    try:
        a, b, c = (float(p) for p in text.split(":"))
    except ValueError as exc:
        raise UsageError(f"grid must be start:stop:step, got {text!r}") from exc
    if c <= 0 or b < a:
        raise UsageError("grid needs step > 0 and stop >= start")
    n = int(math.floor((b - a) / c + 1e-9))
    return a + c * np.arange(n + 1)


def _omega(args) -> BasePoint:
    try:
        return BasePoint.parse(args.omega)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad --omega: {exc}") from exc


def _qsq(args) -> Fraction:
    if getattr(args, "qsq", None) is not None:
        qsq = _rational(args.qsq)
    elif getattr(args, "q", None) is not None:
        q = _rational(args.q)
        if q <= 0:
            raise UsageError("Q must be positive")
        qsq = q * q
    else:
        raise UsageError("need --q or --qsq")
    if qsq <= 0:
        raise UsageError("Q must be positive")
    return qsq


def _elliptic(args, omega: BasePoint) -> int:
    e = int(args.elliptic)
    if e not in (1, stabilizer_order(omega)):
        raise UsageError(f"--elliptic {e} does not match the stabilizer order {stabilizer_order(omega)} of omega")
    return e


# --- output ------------------------------------------------------------------

@dataclass
class Output:
    header: dict
    columns: list[str] | None = None
    rows: list[list] = field(default_factory=list)
    text: str | None = None
    meta: dict = field(default_factory=dict)

    def render(self) -> str:
        if self.text is not None:
            return self.text
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.header, sort_keys=True, separators=(",", ":")) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([fmt(v) if isinstance(v, (int, float, np.integer, np.floating)) else v for v in r])
        return buf.getvalue()


def _header(args, **extra) -> dict:
    keys = ("command", "omega", "q", "qsq", "mode", "bin_width", "xi_max", "t_cut", "elliptic", "seed",
            "m", "xi", "method", "samples", "delta", "delta_max", "x", "t_grid", "x_grid", "emit", "b_norm")
    h = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    h["version"] = __version__
    h.update(extra)
    return h


# --- subcommands ---------------------------------------------------------------

def cmd_enumerate(args) -> Output:
    omega = _omega(args)
    spec = BallSpec(omega, _qsq(args), Mode(args.mode))
    arr = enumerate_arrays(spec, workers=args.threads)
    emit = args.emit or "count"
    if emit == "count":
        st = ball_stats(arr) if spec.mode is Mode.FULL else None
        cols = ["n", "b_total", "b_inner", "b_outer", "b_boundary", "b_stabilizer"]
        if st is None:
            st_full = ball_stats(enumerate_arrays(BallSpec(omega, spec.qsq), workers=args.threads))
            row = [len(arr), st_full.b_total, st_full.b_inner, st_full.b_outer, st_full.b_boundary, st_full.b_stabilizer]
        else:
            row = [len(arr), st.b_total, st.b_inner, st.b_outer, st.b_boundary, st.b_stabilizer]
        return Output(_header(args), cols, [row], meta={"count": len(arr)})
    if emit != "csv":
        raise UsageError("--emit must be count or csv")
    D = omega.scale[0]
    _, _, _, Ts = arr.scaled_coords()
    rows = []
    for a, b, c, d, ts in zip(arr.a.tolist(), arr.b.tolist(), arr.c.tolist(), arr.d.tolist(), np.asarray(Ts).tolist()):
        T = Fraction(int(ts), D * D)
        rows.append([a, b, c, d, T.numerator, T.denominator])
    return Output(_header(args), ["a", "b", "c", "d", "T_num", "T_den"], rows, meta={"count": len(arr)})


def _grid_for(args, with_theory: bool):
    omega = _omega(args)
    qsq = _qsq(args)
    e = _elliptic(args, omega)
    samples = angle_arrays(omega, qsq=qsq, mode=args.mode, workers=args.threads)
    b_norm = float(args.b_norm) if args.b_norm is not None else None
    t_cut = _rational(args.t_cut) if with_theory else None
    if t_cut is not None and t_cut <= omega.delta:
        raise UsageError("--t-cut must exceed Delta")
    grid = correlation_grid(samples, qsq, args.mode, float(args.bin_width), float(args.xi_max),
                            t_cut=t_cut, b_norm=b_norm, elliptic=e)
    meta = {"b_total": samples.b_total, "n_stabilizer": samples.n_stabilizer,
            "n_samples_used": grid.n_samples, "b_norm": grid.b_norm}
    return grid, meta


def cmd_paircorr(args) -> Output:
    grid, meta = _grid_for(args, with_theory=False)
    rows = [[x, r, g] for x, r, g in zip(grid.xi_values, grid.r2_empirical, grid.g2_empirical)]
    return Output(_header(args, b_norm_used=grid.b_norm), ["xi", "r2_emp", "g2_emp"], rows, meta=meta)


def cmd_compare(args) -> Output:
    grid, meta = _grid_for(args, with_theory=True)
    rows = [list(r) for r in zip(grid.xi_values, grid.r2_empirical, grid.g2_empirical, grid.g2_theory, grid.tail_bound)]
    meta["max_tail_bound"] = float(np.nanmax(grid.tail_bound)) if len(grid.tail_bound) else 0.0
    return Output(_header(args, b_norm_used=grid.b_norm),
                  ["xi", "r2_emp", "g2_emp", "g2_theory", "tail_bound"], rows, meta=meta)


def cmd_density(args) -> Output:
    omega = _omega(args)
    e = _elliptic(args, omega)
    t_cut = _rational(args.t_cut)
    if t_cut <= omega.delta:
        raise UsageError("--t-cut must exceed Delta")
    if args.x is not None:
        xs = np.array([float(v) for v in str(args.x).split(",")])
    elif args.x_grid is not None:
        xs = _grid(args.x_grid)
    else:
        # same centers as the histogram in compare, so the two columns match exactly
        bw = float(args.bin_width)
        edges = np.arange(int(round(float(args.xi_max) / bw)) + 1) * bw
        xs = 0.5 * (edges[:-1] + edges[1:])
    if np.any(xs <= 0):
        raise UsageError("x values must be positive")
    series = theory_series(omega, t_cut, workers=args.threads)
    rows = []
    for x in xs:
        val, tail, warn = series.g2(e * x)
        rows.append([x, val, tail, int(warn)])
    z, ztail = series.g2_zero()
    return Output(_header(args, g2_zero=fmt(z), g2_zero_tail=fmt(ztail)),
                  ["x", "g2_theory", "tail_bound", "warning"], rows,
                  meta={"n_terms": int(series.mult.sum()), "n_shells": len(series.ts)})


def _matrix(text: str) -> GroupElement:
    try:
        a, b, c, d = (int(p) for p in text.split(","))
        return GroupElement(a, b, c, d)
    except (ValueError, InvalidElementError) as exc:
        raise UsageError(f"bad --m {text!r}: {exc}") from exc


def cmd_volumes(args) -> Output:
    omega = _omega(args)
    if not args.m:
        raise UsageError("need --m a,b,c,d")
    if args.xi is None:
        raise UsageError("need --xi")
    method = args.method
    if method not in ("mc", "closed", "both"):
        raise UsageError("--method must be mc, closed or both")
    n = int(float(args.samples))
    results = []
    for ms in args.m:
        try:
            spec = RegionSpec(omega, _matrix(ms), float(args.xi))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        rec = {"m": ms, "xi": float(args.xi), "f_identity_residual": f_identity_residual(spec),
               "dBM_dxi": dBM_dxi(spec)}
        if method in ("closed", "both"):
            rec["closed"] = vol_closed(spec).value
        if method in ("mc", "both"):
            est = vol_mc(spec, n, int(args.seed), workers=args.threads)
            rec["mc"], rec["mc_std_error"] = est.value, est.std_error
        rec["value"] = rec["closed"] if "closed" in rec else rec["mc"]
        rec["std_error"] = rec.get("mc_std_error", 0.0) if method == "mc" else 0.0
        results.append(rec)
    if (args.emit or "json") == "csv":
        cols = ["m", "xi", "method", "value", "std_error", "closed", "mc", "mc_std_error", "f_identity_residual"]
        rows = [[r["m"], r["xi"], method, r["value"], r["std_error"], r.get("closed", math.nan),
                 r.get("mc", math.nan), r.get("mc_std_error", math.nan), r["f_identity_residual"]] for r in results]
        return Output(_header(args), cols, rows)
    out = []
    for r in results:
        d = {"value": float(fmt(r["value"])), "std_error": float(fmt(r["std_error"])),
             "f_identity_residual": float(fmt(r["f_identity_residual"])), "m": r["m"], "xi": r["xi"]}
        if method == "both":
            d["mc"] = {"value": float(fmt(r["mc"])), "std_error": float(fmt(r["mc_std_error"]))}
            d["closed"] = {"value": float(fmt(r["closed"]))}
        out.append(d)
    payload = out[0] if len(out) == 1 else out
    return Output(_header(args), text=json.dumps(payload, sort_keys=True) + "\n")


def cmd_geodesics(args) -> Output:
    if args.delta is not None:
        deltas = [int(args.delta)]
    elif args.delta_max is not None:
        deltas = list(range(1, int(args.delta_max) + 1))
    else:
        raise UsageError("need --delta or --delta-max")
    rows = []
    for d in deltas:
        if not geo.in_domain(d):
            if args.delta is not None:
                raise UsageError(f"{d} is not in D_rho")
            continue
        r = geo.classify(d)
        pairs = ";".join(f"({b},{c})" for b, c in sorted(r.pairs))
        pm = f"({r.pell_min.t_big},{r.pell_min.k_small})"
        nine = "-" if r.nine_solution is None else f"({r.nine_solution[0]},{r.nine_solution[1]})"
        label = f"({r.class_label[0]},{r.class_label[1]})"
        rows.append([d, pairs, pm, nine, label, r.fibers, r.n_classes])
    return Output(_header(args), ["delta", "pairs", "T_k", "t_u", "class", "fibers", "classes"], rows)


def cmd_selberg(args) -> Output:
    if args.x is None:
        raise UsageError("need --x")
    spec = KernelSpec(float(args.x))
    ts = _grid(args.t_grid or "0:10:1")
    rows = []
    for t in ts:
        v = h_transform(spec, float(t))
        rows.append([t, v.h.real, v.h.imag, v.est_abs_error])
    return Output(_header(args, r1=fmt(spec.r1), r2=fmt(spec.r2)), ["t", "re_h", "im_h", "err"], rows)


COMMANDS = {
    "enumerate": cmd_enumerate,
    "paircorr": cmd_paircorr,
    "density": cmd_density,
    "compare": cmd_compare,
    "volumes": cmd_volumes,
    "geodesics": cmd_geodesics,
    "selberg": cmd_selberg,
}


def _add_globals(p: argparse.ArgumentParser, suppress: bool):
    kw = {"default": argparse.SUPPRESS} if suppress else {"default": None}
    p.add_argument("--omega", help='base point: "i", "rho" or "u=p/q,ksq=p/q"', **kw)
    p.add_argument("--threads", type=int, help="worker processes", **kw)
    p.add_argument("--out", help="output file (stdout if omitted)", **kw)
    p.add_argument("--seed", type=int, help="Monte Carlo seed", **kw)
    p.add_argument("--config", help="JSON file with flag values", **kw)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latticecorr", description="Pair correlation of hyperbolic lattice angles")
    _add_globals(p, suppress=False)
    sub = p.add_subparsers(dest="command")
    sp = {}
    for name in COMMANDS:
        sp[name] = sub.add_parser(name)
        _add_globals(sp[name], suppress=True)
    for name in ("enumerate", "paircorr", "compare"):
        sp[name].add_argument("--q", help="ball radius Q (integer, p/q or decimal)")
        sp[name].add_argument("--qsq", help="Q^2 as an exact rational (overrides --q)")
        sp[name].add_argument("--mode", choices=[m.value for m in Mode])
    sp["enumerate"].add_argument("--emit", choices=["count", "csv"])
    for name in ("paircorr", "compare", "density"):
        sp[name].add_argument("--bin-width", dest="bin_width", type=float)
        sp[name].add_argument("--xi-max", dest="xi_max", type=float)
        sp[name].add_argument("--elliptic", type=int, help="1, or the stabilizer order of omega")
    for name in ("paircorr", "compare"):
        sp[name].add_argument("--b-norm", dest="b_norm", type=float, help="normalization count (default: ball size)")
    for name in ("compare", "density"):
        sp[name].add_argument("--t-cut", dest="t_cut", help="series truncation T_M <= t_cut")
    sp["density"].add_argument("--x", help="comma separated x values")
    sp["density"].add_argument("--x-grid", dest="x_grid", help="start:stop:step")
    sp["volumes"].add_argument("--m", action="append", help="a,b,c,d (repeatable)")
    sp["volumes"].add_argument("--xi", type=float)
    sp["volumes"].add_argument("--method", choices=["mc", "closed", "both"])
    sp["volumes"].add_argument("--samples")
    sp["volumes"].add_argument("--emit", choices=["json", "csv"])
    sp["geodesics"].add_argument("--delta", type=int)
    sp["geodesics"].add_argument("--delta-max", dest="delta_max", type=int)
    sp["selberg"].add_argument("--x", type=float)
    sp["selberg"].add_argument("--t-grid", dest="t_grid", help="start:stop:step")
    sp["selberg"].add_argument("--emit", choices=["csv"])
    return p


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from --config, then from built-in defaults."""
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        for k, v in cfg.items():
            k = k.replace("-", "_")
            # keys that the subcommand does not take are ignored
            if hasattr(args, k) and getattr(args, k) is None:
                setattr(args, k, v)
    for k, v in DEFAULTS.items():
        if hasattr(args, k) and getattr(args, k) is None:
            setattr(args, k, v)
    if int(args.threads) < 1:
        raise UsageError("--threads must be >= 1")
    args.threads = int(args.threads)
    return args


def run(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    out = COMMANDS[args.command](args)
    text = out.render()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        meta = {
            "config": out.header,
            "versions": {"latticecorr": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "threads": args.threads,
            "wall_time_s": time.perf_counter() - t0,
        }
        meta.update(out.meta)
        with open(args.out + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=str)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        resolve(args)
        return run(args)
    except UsageError as exc:
        print(f"latticecorr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"latticecorr: capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    raise SystemExit(main())
