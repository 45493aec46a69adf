"""Command-line interface.

JSON goes to standard output (or ``--output``); ``simulate`` writes CSV.
Exit codes: 0 success, 2 invalid input, 3 numerical failure.  Failures print
a single JSON object on standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import dimension, geometry, numeration, spectral, stochastics
from ._parallel import thread_count
from .errors import NumericalError, ValidationError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _frac(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)


def _unit_float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"{text!r} is not finite")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text!r} is not a positive integer")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"{text!r} is negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ostrowski", description="Ostrowski map toolkit.")
    p.add_argument("--output", "-o", help="write to this path instead of standard output")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("expand", help="digit pairs, orbit, continuants and approximants of (x, y)")
    e.add_argument("--x", type=_unit_float, required=True)
    e.add_argument("--y", type=_unit_float, required=True)
    e.add_argument("--depth", type=_positive_int, required=True)

    r = sub.add_parser("reconstruct", help="partial sum of the expansion of y in base x")
    r.add_argument("--x", type=_unit_float, required=True)
    r.add_argument("--digits", required=True, help="comma-separated a:b pairs")

    c = sub.add_parser("cylinder", help="vertices, area and diameter of a cylinder")
    c.add_argument("--word", required=True, help="comma-separated a:b pairs with b < a")

    g = sub.add_parser("eigen", help="leading eigenvalue of the transfer operator")
    g.add_argument("--s", type=float, required=True)
    g.add_argument("--w", type=float, default=0.0, help="weight parameter (default 0)")
    g.add_argument(
        "--weight-N", type=_positive_int, default=1,
        help="the weight is the indicator of a <= weight-N, b = a - 1 (default 1)",
    )
    g.add_argument("--N", type=_positive_int, default=None, help="restrict to branches (a, a-1), a <= N")
    g.add_argument("--degree", type=_nonneg_int, default=24, help="polynomial degree per sheet (default 24)")
    g.add_argument("--amax", type=_positive_int, default=64, help="explicit branch levels (default 64)")
    g.add_argument("--tail", type=int, choices=(0, 1, 2), default=2, help="tail correction order (default 2)")

    d = sub.add_parser("dimension", help="Hausdorff dimension bounds for E_N")
    d.add_argument("--N", type=_positive_int, required=True)
    d.add_argument("--tol", type=float, default=1e-12, help="eigenvalue residual tolerance (default 1e-12)")

    k = sub.add_parser("density-check", help="compare the computed invariant density with the closed form")
    k.add_argument("--degree", type=_nonneg_int, default=24, help="polynomial degree per sheet (default 24)")

    s = sub.add_parser("simulate", help="Monte Carlo experiments (CSV output)")
    s.add_argument("--what", choices=("yn-law", "clt", "delta0", "dnn", "correlation"), required=True)
    s.add_argument("--samples", type=_positive_int, required=True)
    s.add_argument("--depth", type=_positive_int, required=True, help="orbit length, Birkhoff length or maximal lag")
    s.add_argument("--seed", type=_nonneg_int, required=True)
    s.add_argument("--N", type=_positive_int, default=2, help="digit bound for dnn (default 2)")
    return p


# ---------------------------------------------------------------- commands


def cmd_expand(a):
    exp = numeration.expand(a.x, a.y, a.depth)
    apx = numeration.approximants(a.x, a.y, a.depth)
    return {
        "digits": [[p.a, p.b] for p in exp.word],
        "orbit": [[x, y] for x, y in exp.orbit],
        "continuants": [
            {
                "p_prev": c.p_prev,
                "p_cur": c.p_cur,
                "q_prev": c.q_prev,
                "q_cur": c.q_cur,
                "theta_prev": float(c.theta_prev),
                "theta_cur": float(c.theta_cur),
            }
            for c in exp.continuants
        ],
        "approximants": [
            {"k": t.k, "M": t.M, "distance": float(t.distance), "remainder": float(t.remainder)} for t in apx
        ],
        "terminated": exp.terminated,
    }


def cmd_reconstruct(a):
    word = numeration.DigitWord.parse(a.digits)
    if len(word) == 0:
        raise ValidationError("no digits given")
    got = numeration.expand(a.x, 0, len(word)).word.a
    if got != word.a:
        raise ValidationError(f"partial quotients {list(word.a)} do not match x (expansion gives {list(got)})")
    partial, bound = numeration.reconstruct(a.x, word.b)
    return {
        "partial_sum": float(partial),
        "remainder_bound": float(bound),
        "partial_sum_exact": _frac(partial),
        "remainder_bound_exact": _frac(bound),
    }


def cmd_cylinder(a):
    cyl = geometry.cylinder(numeration.DigitWord.parse(a.word))
    return {
        "vertices": {name: [_frac(v[0]), _frac(v[1])] for name, v in zip("ABCD", cyl.vertices)},
        "measure": _frac(cyl.measure),
        "diam": cyl.diam,
        "diam_lower": cyl.diam_lower,
        "diam_upper": cyl.diam_upper,
        "bounds_ok": cyl.bounds_ok,
    }


def _weight(a):
    if a.w == 0:
        return spectral.WeightSpec()
    return spectral.WeightSpec.constrained_digits(a.weight_N, a.w)


def cmd_eigen(a):
    cfg = spectral.SpectralConfig(
        s=a.s, weight=_weight(a), degree=a.degree, a_max=a.amax, tail_order=a.tail, constrained_N=a.N
    )
    res = spectral.solve(cfg)
    pts = spectral.density_sample_points(100, seed=7)
    return {
        "lambda": res.lam,
        "rho": res.rho,
        "residual": res.residual,
        "residual2d": spectral.residual_2d(res, pts),
        "iterations": res.iterations,
    }


def cmd_dimension(a):
    b = dimension.bounds(a.N, a.tol)
    return {
        "N": b.N,
        "s1": b.s1,
        "s2": b.s2,
        "lower": b.lower,
        "upper": b.upper,
        "tol": b.tol,
        "diagnostics": b.diagnostics,
    }


def cmd_density_check(a):
    res = spectral.solve(spectral.SpectralConfig(degree=a.degree))
    return {
        "sup_error": spectral.density_error(res),
        "normalization": res.eigenfunction.integral(n=200),
        "lambda": res.lam,
        "degree": a.degree,
    }


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def cmd_simulate(a):
    src = stochastics.RandomSource(a.seed)
    if a.what == "yn-law":
        rep = stochastics.yn_law_experiment(a.samples, max(a.depth, 20), src)
        return _csv(["z", "empirical", "theoretical"], rep.cdf_table)
    if a.what == "clt":
        rep = stochastics.birkhoff_experiment(stochastics.Observable.sheet0(), a.depth, a.samples, src)
        return _csv(["z", "empirical", "theoretical"], rep.cdf_table)
    if a.what == "delta0":
        inv = stochastics.invariance_check(a.samples, src)
        rows = [
            ("p_delta0_initial", inv.p0_initial, 0.5, inv.p0_stderr),
            ("p_delta0_pushed", inv.p0_pushed, 0.5, inv.p0_stderr),
        ]
        for k in range(len(inv.hist_expected)):
            rows.append((f"x_bin_{k}_initial", inv.hist_initial[k], inv.hist_expected[k], inv.hist_stderr[k]))
            rows.append((f"x_bin_{k}_pushed", inv.hist_pushed[k], inv.hist_expected[k], inv.hist_stderr[k]))
        return _csv(["quantity", "empirical", "theoretical", "stderr"], rows)
    if a.what == "dnn":
        mean = stochastics.mu_mean(stochastics.Observable.constrained_digits(a.N, centered=False))
        checkpoints = sorted({max(1, round(a.depth * k / 10)) for k in range(1, 11)})
        ns, means, ses = stochastics.digit_count_means(a.N, checkpoints, a.samples, src)
        return _csv(["n", "mean", "theoretical", "stderr"], [(int(n), m, n * mean, e) for n, m, e in zip(ns, means, ses)])
    obs = stochastics.Observable.sheet0()
    tab = stochastics.correlation_decay(obs, obs, range(a.depth + 1), a.samples, src)
    return _csv(["lag", "corr", "stderr"], [(int(k), c, e) for k, c, e in zip(tab.lags, tab.corr, tab.stderr)])


COMMANDS = {
    "expand": cmd_expand,
    "reconstruct": cmd_reconstruct,
    "cylinder": cmd_cylinder,
    "eigen": cmd_eigen,
    "dimension": cmd_dimension,
    "density-check": cmd_density_check,
    "simulate": cmd_simulate,
}


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        thread_count()
        out = COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_INVALID)
    except NumericalError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_NUMERICAL)
    except (ValidationError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_INVALID)
    except (OverflowError, ArithmeticError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_NUMERICAL)
    text = out if isinstance(out, str) else json.dumps(out) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())
