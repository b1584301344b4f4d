"""Command-line front end: every verification as a subcommand with JSON/CSV output.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from . import __version__
from .group import GroupParams, random_group_points
from .montecarlo import DEFAULT_SEED, MonteCarloConfig, worker_count

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def parse_number(text: str):
    """Float or exact ``p/q`` rational."""
    text = text.strip()
    if "/" in text:
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise argparse.ArgumentTypeError(f"bad rational {text!r}") from exc
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number {text!r}") from exc


def _check(name: str, passed: bool, value=None, tolerance=None) -> dict:
    return {"name": name, "passed": bool(passed), "value": value, "tolerance": tolerance}


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# -- commands ---------------------------------------------------------------------


def cmd_constants(args) -> tuple[dict, list]:
    from .inequalities import c_lambda_forms, c_prime_forms, sharp_hls_constants, sobolev_constants

    params = GroupParams(args.n)
    if args.d is not None:
        rep = sobolev_constants(float(args.d), params)
        ratio = rep.c_d / rep.c_prime_d
        expected = 2.0 ** (params.Q - float(args.d) - 3)
        checks = [_check("c_d_over_c_prime_d", abs(ratio / expected - 1) <= 1e-12, ratio, expected)]
        return {"command": "constants", **rep.to_dict(), "c_ratio_expected": expected}, checks
    lam = float(args.lam if args.lam is not None else 8.0)
    rep = sharp_hls_constants(lam, params)
    ratio = rep.C_prime_lambda / rep.C_lambda
    expected = 2.0 ** ((4 * params.n + 3) * lam / params.Q)
    forms = list(c_prime_forms(lam, params))
    cforms = list(c_lambda_forms(lam, params))
    spread = max(abs(v / rep.C_prime_lambda - 1) for v in forms)
    cspread = max(abs(v / rep.C_lambda - 1) for v in cforms)
    checks = [
        _check("c_prime_over_c_ratio", abs(ratio / expected - 1) <= 1e-12, ratio, expected),
        _check("c_prime_printed_forms", spread <= 1e-12, spread, 1e-12),
        _check("c_lambda_printed_forms", cspread <= 1e-12, cspread, 1e-12),
    ]
    payload = {"command": "constants", **rep.to_dict(), "ratio": ratio, "ratio_expected": expected,
               "c_prime_forms": forms, "c_lambda_forms": cforms}
    return payload, checks


def cmd_eigs(args):
    from .spectral import EigenTable, eigen_table

    params = GroupParams(args.n)
    alpha = args.alpha if args.alpha is not None else 1.5
    table = eigen_table(float(alpha), params, args.jmax, kernel=args.kernel)
    bad = table.gap_ok(args.tolerance if args.tolerance is not None else 1e-6)
    checks = [_check("oracle_gaps", not bad, len(bad), args.tolerance or 1e-6)]
    payload = {"command": "eigs", "n": args.n, "alpha": float(alpha), "kernel": args.kernel, "jmax": args.jmax,
               "rows": [dict(zip(EigenTable.CSV_COLUMNS, r)) for r in table.csv_rows()]}
    return payload, checks, (EigenTable.CSV_COLUMNS, table.csv_rows())


def cmd_verify_distance(args):
    from .group import dist_g
    from .sphere import cayley, cayley_inv, dist_s, jac_cayley, jac_cayley_sphere

    params = GroupParams(args.n)
    rng = np.random.default_rng(args.seed)
    count = args.samples or 10_000
    u = random_group_points(params.n, count, rng)
    v = random_group_points(params.n, count, rng)
    Q = params.Q
    cu, cv = cayley(u), cayley(v)
    lhs = dist_s(cu, cv)
    rhs = 2.0 ** (3.0 / Q - 1) * jac_cayley(u) ** (1 / (2 * Q)) * jac_cayley(v) ** (1 / (2 * Q)) * dist_g(u, v)
    rel = float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))
    back = cayley_inv(cu)
    rt = float(max(np.max(np.abs(back.q - u.q)), np.max(np.abs(back.w - u.w))))
    jg, js = jac_cayley(u), jac_cayley_sphere(cu)
    jrel = float(np.max(np.abs(jg - js) / jg))
    checks = [
        _check("distance_relation", rel <= 1e-11, rel, 1e-11),
        _check("cayley_round_trip", rt <= 1e-10, rt, 1e-10),
        _check("jacobian_forms", jrel <= 1e-12, jrel, 1e-12),
    ]
    return {"command": "verify-distance", "n": args.n, "samples": count, "seed": args.seed}, checks


def cmd_verify_el(args):
    from .inequalities import ExtremizerSpec, el_residual

    params = GroupParams(args.n)
    lam = float(args.lam if args.lam is not None else 8.0)
    mc = MonteCarloConfig(args.samples or 200_000, args.seed)
    spec = ExtremizerSpec.axial(params.n, args.xi, lam)
    res = el_residual(spec, params, mc)

    def perturbed(z):
        return 1.0 + 0.5 * z.zeta[..., 0, 0]

    bad = el_residual(perturbed, params, mc, lam=lam)
    tol = args.tolerance if args.tolerance is not None else 0.02
    checks = [
        _check("extremizer_residual", res.residual <= tol, res.residual, tol),
        _check("perturbed_residual", bad.residual >= 0.05, bad.residual, 0.05),
    ]
    payload = {"command": "verify-el", "n": args.n, "lambda": lam, "xi": args.xi, "samples": mc.sample_count,
               "seed": args.seed, "residual": res.residual, "perturbed_residual": bad.residual,
               "ratios": res.ratios.tolist()}
    return payload, checks


def cmd_bilinear(args):
    from .spectral import as_fraction, bilinear_sweep

    params = GroupParams(args.n)
    alpha = as_fraction(args.alpha if args.alpha is not None else Fraction(1))
    sweep = bilinear_sweep(alpha, params, args.jmax)
    viol = sweep.violations()
    first = sweep.first_violation()
    first_k1 = sweep.first_violation(k=1)
    zeros = sweep.zeros()
    if alpha >= 1:
        checks = [_check("no_violations", not viol, len(viol), 0)]
    else:
        # below alpha = 1 a violation is the expected finding
        checks = [_check("violation_found", bool(viol), len(viol), None)]
    payload = {
        "command": "bilinear", "n": args.n, "alpha": str(alpha), "jmax": args.jmax,
        "violations": len(viol), "zeros": len(zeros),
        "first_violation": None if first is None else {"j": first.j, "k": first.k},
        "first_violation_k1": None if first_k1 is None else {"j": first_k1.j, "k": first_k1.k},
        "sufficient_threshold_k1": None if alpha >= 1 else math.ceil((Fraction(params.Q, 2) - alpha) / (1 - alpha)),
    }
    return payload, checks, (("n", "alpha", "j", "k", "margin", "margin_float"), sweep.csv_rows())


def cmd_second_variation(args):
    from .spectral import lattice, second_variation_coef

    params = GroupParams(args.n)
    lam = float(args.lam if args.lam is not None else 8.0)
    rows, bad = [], []
    for idx in lattice(args.jmax):
        s = second_variation_coef(lam, idx, params)
        rows.append((params.n, lam, idx.j, idx.k, s))
        if (idx.j, idx.k) == (0, 0):
            ok = s > 0
        elif (idx.j, idx.k) == (1, 0):
            ok = abs(s) <= 1e-12
        else:
            ok = s < 0
        if not ok:
            bad.append({"j": idx.j, "k": idx.k, "s": s})
    checks = [_check("sign_pattern", not bad, len(bad), None)]
    payload = {"command": "second-variation", "n": args.n, "lambda": lam, "jmax": args.jmax, "failures": bad,
               "rows": [dict(zip(("n", "lambda", "j", "k", "s"), r)) for r in rows]}
    return payload, checks, (("n", "lambda", "j", "k", "s"), rows)


def cmd_optimize(args):
    from .inequalities import c_prime_spectral
    from .optimizer import build_grid, el_iterate, random_zonal_start

    params = GroupParams(args.n)
    lam = float(args.lam if args.lam is not None else 8.0)
    grid = build_grid(params, args.resolution)
    rng = np.random.default_rng(args.seed)
    f0 = random_zonal_start(grid, rng, amplitude=args.amplitude)
    run = el_iterate(grid, f0, lam, params, max_iter=args.max_iter)
    ref = c_prime_spectral(lam, params)
    report = run.report(lam, params.n, args.resolution, ref)
    tol = args.tolerance if args.tolerance is not None else 1e-3
    checks = [
        _check("converged_to_constant", abs(report["rel_gap"]) <= tol, report["rel_gap"], tol),
        _check("never_exceeds_sharp_constant", max(run.trace) <= ref * (1 + 5e-3), max(run.trace) / ref - 1, 5e-3),
    ]
    return {"command": "optimize", **report, "seed": args.seed}, checks


def cmd_logsob(args):
    from .inequalities import logsob_constant, logsob_literal_expression, logsob_limit_proxy

    params = GroupParams(args.n)
    C = logsob_constant(params)
    lam = params.Q - args.gap
    proxy = logsob_limit_proxy(lam, params)
    rel = abs(proxy / C - 1)
    tol = args.tolerance if args.tolerance is not None else 1e-4
    checks = [_check("limit_consistency", rel <= tol, rel, tol)]
    payload = {"command": "logsob", "n": args.n, "Q": params.Q, "logsob_C": C, "lambda": lam,
               "limit_proxy": proxy, "rel_gap": rel, "literal_expression": logsob_literal_expression(lam, params)}
    return payload, checks


COMMANDS = {
    "constants": cmd_constants,
    "eigs": cmd_eigs,
    "verify-distance": cmd_verify_distance,
    "verify-el": cmd_verify_el,
    "bilinear": cmd_bilinear,
    "second-variation": cmd_second_variation,
    "optimize": cmd_optimize,
    "logsob": cmd_logsob,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=1, help="quaternionic dimension (default 1)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed (default 42)")
    common.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")
    common.add_argument("--resolution", type=int, default=64, help="zonal grid nodes per axis (default 64)")
    common.add_argument("--tolerance", type=float, default=None, help="check tolerance (command specific default)")
    common.add_argument("--output", default=None, help="report path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--jmax", type=int, default=10)
    common.add_argument("--kmax", type=int, default=None, help="accepted for symmetry; rows always run k <= j")

    parser = argparse.ArgumentParser(prog="qhls", description="Sharp HLS verification lab on the quaternionic sphere.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", parents=[common], help="sharp HLS or Sobolev constants")
    p.add_argument("--lambda", dest="lam", type=parse_number)
    p.add_argument("--d", type=parse_number)
    p = sub.add_parser("eigs", parents=[common], help="closed-form eigenvalues vs quadrature")
    p.add_argument("--alpha", type=parse_number)
    p.add_argument("--kernel", choices=("k1", "k2"), default="k1")
    sub.add_parser("verify-distance", parents=[common], help="Cayley transform and distance relation")
    p = sub.add_parser("verify-el", parents=[common], help="Euler-Lagrange residual of the extremizer")
    p.add_argument("--lambda", dest="lam", type=parse_number)
    p.add_argument("--xi", type=float, default=0.3, help="extremizer parameter along e_{n+1}")
    p = sub.add_parser("bilinear", parents=[common], help="exact bilinear margins")
    p.add_argument("--alpha", type=parse_number)
    p = sub.add_parser("second-variation", parents=[common], help="second-variation sign map")
    p.add_argument("--lambda", dest="lam", type=parse_number)
    p = sub.add_parser("optimize", parents=[common], help="Euler-Lagrange iteration on the zonal grid")
    p.add_argument("--lambda", dest="lam", type=parse_number)
    p.add_argument("--amplitude", type=float, default=0.3)
    p.add_argument("--max-iter", type=int, default=200)
    p = sub.add_parser("logsob", parents=[common], help="log-Sobolev constant and its limit check")
    p.add_argument("--gap", type=float, default=1e-3, help="evaluate the limit at lambda = Q - gap")
    return parser


def _render(payload: dict, checks: list, table, fmt: str) -> str:
    if fmt == "csv":
        if table is None:
            raise UsageError("this command has no tabular output; use --format json")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table[0])
        for row in table[1]:
            w.writerow(_clean(list(row)))
        return buf.getvalue()
    body = {"schema_version": SCHEMA_VERSION, **payload, "checks": checks, "passed": all(c["passed"] for c in checks),
            "metadata": {"timestamp": datetime.now(timezone.utc).isoformat(), "workers": worker_count(),
                         "version": __version__}}
    return json.dumps(_clean(body), sort_keys=True, indent=2) + "\n"


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.n < 1:
            raise UsageError("--n must be >= 1")
        result = COMMANDS[args.command](args)
        payload, checks = result[0], result[1]
        table = result[2] if len(result) > 2 else None
        text = _render(payload, checks, table, args.format)
    except (UsageError, ValueError, ArithmeticError) as exc:
        print(f"qhls: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    passed = all(c["passed"] for c in checks)
    try:
        if args.output in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
    except OSError as exc:
        print(f"qhls: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.format == "csv" or args.output not in (None, "-"):
        summary = {"command": args.command, "passed": passed,
                   "failed_checks": [c for c in checks if not c["passed"]]}
        for key in ("first_violation", "first_violation_k1", "rel_gap", "final_quotient"):
            if key in payload:
                summary[key] = payload[key]
        print(json.dumps(_clean(summary), sort_keys=True), file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
