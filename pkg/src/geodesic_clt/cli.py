"""Command-line front end.

Exit status: 0 on success, 2 on usage errors (argparse), 1 on computation errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .amplitude import CacheError, build_table, kappa_tail_bound, partial_stats, peter_kappa
from .quadratic import nu_count
from .relations import find_relations
from .stats import UndersamplingError, default_kappa, moment_report, residual_rms
from .testfn import make_test_function
from .trace import (
    ExperimentConfig,
    RegimeError,
    TableRangeError,
    hyperbolic_sum,
    mean_term,
    read_eigenvalues,
    required_nmax,
    residual_term,
    spectral_side,
)

PROG = "geodesic-clt"


def sci_int(text: str) -> int:
    """Integer flag that also accepts scientific notation such as 1e6."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value.is_integer():
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(value)


def _workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


def _stanza(args: argparse.Namespace) -> dict:
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k != "func"}
    return {"program": PROG, "version": __version__, "command": args.command, "flags": flags}


def _stanza_line(args: argparse.Namespace) -> str:
    return "# " + json.dumps(_stanza(args), sort_keys=True)


def _cache(args) -> str | None:
    return args.cache


def _table_for(L: float, f, args):
    return build_table(max(3, required_nmax(L * f.support_radius)), _cache(args))


# ---------------------------------------------------------------- subcommands


def cmd_amp(args) -> None:
    table = build_table(args.nmax, _cache(args))
    Path(args.out).write_bytes(table.to_bytes())
    print(_stanza_line(args))
    print(f"wrote {len(table)} rows to {args.out}")


def cmd_peter(args) -> None:
    print(_stanza_line(args))
    kappa = peter_kappa(args.pmax)
    print(f"kappa {kappa:.12g}")
    print(f"tail_bound {kappa * kappa_tail_bound(args.pmax):.3g}")


def cmd_meansq(args) -> None:
    table = build_table(args.nmax, _cache(args))
    s, s2 = partial_stats(table, args.nmax)
    kappa = default_kappa()
    print(_stanza_line(args))
    print(f"mean {s / args.nmax:.12g}")
    print(f"mean_square_over_kappa {s2 / (kappa * args.nmax):.12g}")


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(
        T=args.T,
        L=args.L,
        M=args.samples,
        seed=args.seed,
        f_kind=args.f,
        w_kind=args.w,
        mode=args.mode,
        workers=args.workers,
    )


def _report(args) -> dict:
    cfg = _config(args)
    f = make_test_function(cfg.f_kind)
    report = moment_report(cfg, _table_for(cfg.L, f, args))
    data = report.to_dict()
    data["reproducibility"] = _stanza(args)
    return report, data


def _write_json(data: dict, out: str | None) -> None:
    text = json.dumps(data, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_variance(args) -> None:
    report, data = _report(args)
    _write_json(data, args.out)
    if args.out:
        print(f"var_ratio {report.var_ratio:.6f} +- {report.stderr['var_ratio']:.6f}")


def cmd_clt(args) -> None:
    report, data = _report(args)
    _write_json(data, args.out)
    if args.hist:
        with open(args.hist, "w", newline="") as fh:
            fh.write(_stanza_line(args) + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin_left", "bin_right", "count"])
            for row in report.histogram_rows():
                writer.writerow([f"{row[0]:.6g}", f"{row[1]:.6g}", row[2]])
    if args.out:
        m = report.moments
        print(f"m3 {m[3]:.4f} m4 {m[4]:.4f} ks {report.ks:.4f}")


def cmd_relations(args) -> None:
    rels = find_relations(args.nmax, args.kmax)
    lines = [_stanza_line(args), "terms,signs,blocks"]
    for r in rels:
        terms = " ".join(str(n) for n, _ in r.terms)
        signs = " ".join("+" if s > 0 else "-" for _, s in r.terms)
        blocks = " ".join(f"{d}:" + "/".join(str(i) for i in idx) for d, idx in r.blocks)
        lines.append(f"{terms},{signs},{blocks}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"{len(rels)} relations written to {args.out}")
    else:
        sys.stdout.write(text)


def cmd_nu(args) -> None:
    print(nu_count(args.X))


def cmd_residual(args) -> None:
    cfg = _config(args)
    print(_stanza_line(args))
    print(f"rms_over_sigma {residual_rms(cfg):.6g}")


def cmd_trace_eval(args) -> None:
    f = make_test_function(args.f)
    S = hyperbolic_sum(args.tau, args.L, f, _table_for(args.L, f, args))
    print(_stanza_line(args))
    print(f"S {S:.12g}")
    print(f"mean {mean_term(args.tau, args.L, f):.12g}")
    print(f"residual {residual_term(args.tau, args.L, f):.12g}")


def cmd_spectral_check(args) -> None:
    f = make_test_function(args.f)
    eigs = read_eigenvalues(args.eigs)
    spec = spectral_side(args.tau, args.L, f, eigs)
    geo = (
        mean_term(args.tau, args.L, f)
        + hyperbolic_sum(args.tau, args.L, f, _table_for(args.L, f, args))
        + residual_term(args.tau, args.L, f)
    )
    print(_stanza_line(args))
    print(f"spectral {spec:.12g}")
    print(f"geometric {geo:.12g}")
    print(f"gap {spec - geo:.6g}")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    fmt = argparse.ArgumentDefaultsHelpFormatter
    cache_default = os.environ.get("GSL_CACHE_DIR")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_, formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    def cache(p):
        p.add_argument("--cache", default=cache_default, help="amplitude cache directory (env GSL_CACHE_DIR)")

    def experiment(p, samples=200_000):
        p.add_argument("--T", type=float, required=True, help="window base; tau ranges over [T, 2T]")
        p.add_argument("--L", type=float, required=True, help="inverse window width")
        p.add_argument("--samples", type=sci_int, default=samples, help="number of tau samples")
        p.add_argument("--seed", type=sci_int, default=0, help="RNG seed")
        p.add_argument("--f", choices=["triangle", "bump"], default="triangle", help="test function")
        p.add_argument("--w", choices=["bump", "indicator"], default="bump", help="averaging weight")
        p.add_argument("--mode", choices=["montecarlo", "quadrature"], default="montecarlo", help="tau sampling")
        p.add_argument("--workers", type=sci_int, default=_workers(), help="worker threads")
        cache(p)

    p = add("amp", cmd_amp, "build the amplitude table and write it as CSV")
    p.add_argument("--nmax", type=sci_int, required=True, help="largest trace")
    p.add_argument("--out", required=True, help="output CSV path")
    cache(p)

    p = add("peter", cmd_peter, "evaluate the Euler product for the mean-square constant")
    p.add_argument("--pmax", type=sci_int, default=10**6, help="largest prime in the product")

    p = add("meansq", cmd_meansq, "mean and mean square of the amplitudes up to nmax")
    p.add_argument("--nmax", type=sci_int, required=True, help="largest trace")
    cache(p)

    p = add("variance", cmd_variance, "variance of the hyperbolic sum against the model (JSON report)")
    experiment(p)
    p.add_argument("--out", default=None, help="JSON output path (stdout if omitted)")

    p = add("clt", cmd_clt, "moments and distribution of the standardized hyperbolic sum (JSON report)")
    experiment(p)
    p.add_argument("--out", default=None, help="JSON output path (stdout if omitted)")
    p.add_argument("--hist", default=None, help="histogram CSV output path")

    p = add("relations", cmd_relations, "multiplicative relations among norms")
    p.add_argument("--nmax", type=sci_int, required=True, help="largest trace")
    p.add_argument("--kmax", type=sci_int, default=4, help="largest number of terms")
    p.add_argument("--out", default=None, help="CSV output path (stdout if omitted)")

    p = add("nu", cmd_nu, "count triples (d, x, y) with x^2 - d y^2 = 4 and 2 < x < X")
    p.add_argument("--X", type=sci_int, required=True, help="upper limit")

    p = add("residual", cmd_residual, "RMS of the residual term relative to sigma_L")
    experiment(p, samples=20_000)

    p = add("trace-eval", cmd_trace_eval, "evaluate the hyperbolic, mean and residual terms at one tau")
    p.add_argument("--tau", type=float, required=True, help="spectral parameter")
    p.add_argument("--L", type=float, required=True, help="inverse window width")
    p.add_argument("--f", choices=["triangle", "bump"], default="triangle", help="test function")
    cache(p)

    p = add("spectral-check", cmd_spectral_check, "compare an eigenvalue list against the geometric side")
    p.add_argument("--eigs", required=True, help="file with one r value per line")
    p.add_argument("--tau", type=float, required=True, help="spectral parameter")
    p.add_argument("--L", type=float, required=True, help="inverse window width")
    p.add_argument("--f", choices=["triangle", "bump"], default="triangle", help="test function")
    cache(p)
    return parser


ERROR_CLASSES = (
    (RegimeError, "regime error"),
    (CacheError, "cache error"),
    (TableRangeError, "table range error"),
    (UndersamplingError, "sampling error"),
    (OSError, "io error"),
    (ValueError, "input error"),
    (ArithmeticError, "arithmetic error"),
)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:
        for cls, label in ERROR_CLASSES:
            if isinstance(exc, cls):
                print(f"{PROG}: {label}: {exc}", file=sys.stderr)
                return 1
        raise
    return 0


def main(argv=None) -> None:
    try:
        sys.exit(run(argv))
    except KeyboardInterrupt:  # pragma: no cover
        sys.exit(130)
