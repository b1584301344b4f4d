"""Acceptance suite: the ten criteria at their stated tolerances.

Each test records one ``CRITERION k: PASS|FAIL`` line; the lines are printed in
the terminal summary (see ``conftest.py``) and when this file is run directly.
A criterion that the mathematics does not support is still checked as stated
and reported as FAIL with the measured numbers.
"""
import math
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from qhls.group import GroupParams, dist_g, random_group_points
from qhls.inequalities import (
    ExtremizerSpec, c_lambda_forms, c_prime_forms, c_prime_mpmath, c_prime_spectral, conformal_push, el_residual,
    hls_exponent, hls_quotient_mc, logsob_constant, logsob_limit_proxy, sobolev_constants,
    sublaplacian_kernel_constant,
)
from qhls.montecarlo import MonteCarloConfig
from qhls.optimizer import build_grid, el_iterate, quotient, random_zonal_start
from qhls.spectral import (
    EigenIndex, bilinear_sweep, c_coefficient, eig_k1_closed, eig_k2_closed, eig_quadrature, kernel_k1, kernel_k2,
    lattice, second_variation_coef,
)
from qhls.sphere import ConformalMap, SpherePoint, cayley, cayley_inv, dist_s, jac_cayley, jac_cayley_sphere

RESULTS: dict[int, str] = {}


def record(num: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[num] = line
    print(line)
    assert ok, line


def _alphas(params):
    # alpha must lie in (0, Q/4); for n = 1 that excludes 2.5
    return [a for a in (0.75, 1.0, 1.5, 2.0, 2.5) if a < params.Q / 4]


def _gap_ok(closed, quad, rtol=1e-6, zero_atol=1e-8):
    if closed == 0.0:
        return abs(quad) <= zero_atol, abs(quad)
    rel = abs(quad - closed) / abs(closed)
    return rel <= rtol, rel


def test_criterion_01_funk_hecke_oracle():
    t0 = time.perf_counter()
    worst, bad, cells = 0.0, [], 0
    for n in (1, 2):
        params = GroupParams(n)
        for alpha in _alphas(params):
            kern = kernel_k1(alpha)
            for idx in lattice(6):
                ok, gap = _gap_ok(eig_k1_closed(alpha, idx, params), eig_quadrature(kern, idx, params))
                worst = max(worst, gap)
                cells += 1
                if not ok:
                    bad.append((n, alpha, idx.j, idx.k, gap))
    elapsed = time.perf_counter() - t0
    record(1, not bad and elapsed < 60,
           f"{cells} cells, worst gap {worst:.2e}, {elapsed:.1f}s (alpha=2.5 skipped for n=1: outside (0, Q/4))"
           + (f", failures {bad[:3]}" if bad else ""))


def test_criterion_02_k2_consistency():
    worst, bad = 0.0, []
    for n in (1, 2):
        params = GroupParams(n)
        for alpha in _alphas(params):
            kern = kernel_k2(alpha)
            for idx in lattice(6):
                ok, gap = _gap_ok(eig_k2_closed(alpha, idx, params), eig_quadrature(kern, idx, params))
                worst = max(worst, gap)
                if not ok:
                    bad.append((n, alpha, idx.j, idx.k, gap))
    not_one = []
    for n in (1, 2):
        params = GroupParams(n)
        for idx in lattice(6):
            c = c_coefficient(2, idx, params)
            if c != 1:
                not_one.append((n, idx.j, idx.k, str(c)))
    record(2, not bad and not not_one,
           f"K2 worst gap {worst:.2e} ({len(bad)} over 1e-6); C^2_(j,k) != 1 at {len(not_one)} cells, "
           f"all with k = 0: {not_one[:3]}")


def test_criterion_03_distance_relation():
    rng = np.random.default_rng(42)
    rel_w = rt_w = jac_w = 0.0
    for n in (1, 2):
        Q = 4 * n + 6
        u, v = random_group_points(n, 10_000, rng), random_group_points(n, 10_000, rng)
        lhs = dist_s(cayley(u), cayley(v))
        rhs = 2.0 ** (3.0 / Q - 1) * (jac_cayley(u) * jac_cayley(v)) ** (1 / (2 * Q)) * dist_g(u, v)
        rel_w = max(rel_w, float(np.max(np.abs(lhs - rhs) / rhs)))
        back = cayley_inv(cayley(u))
        rt_w = max(rt_w, float(np.max(np.abs(back.q - u.q))), float(np.max(np.abs(back.w - u.w))))
        jg = jac_cayley(u)
        jac_w = max(jac_w, float(np.max(np.abs(jg - jac_cayley_sphere(cayley(u))) / jg)))
    record(3, rel_w <= 1e-11 and rt_w <= 1e-10 and jac_w <= 1e-12,
           f"distance {rel_w:.1e}, round trip {rt_w:.1e}, Jacobians {jac_w:.1e}")


def test_criterion_04_bilinear_inequality():
    problems = []
    for n in (1, 2):
        params = GroupParams(n)
        for alpha in (Fraction(1), Fraction(5, 4), Fraction(3, 2), Fraction(2), Fraction(9, 4)):
            sw = bilinear_sweep(alpha, params, 200)
            if sw.violations():
                problems.append(f"n={n} alpha={alpha}: violations {sw.violations()[:2]}")
            zeros = set(sw.zeros())
            if alpha == 1:
                want = {EigenIndex(0, 0)} | {i for i in sw.margins if i.k >= 2}
            else:
                want = {EigenIndex(0, 0)}
            if zeros != want:
                problems.append(f"n={n} alpha={alpha}: zero set differs")
    sw = bilinear_sweep(Fraction(9, 10), GroupParams(1), 200)
    first = sw.first_violation(k=1)
    if first is None or first.j != 41:
        problems.append(f"alpha=9/10: first k=1 violation at j={None if first is None else first.j}, "
                        f"not 41 (D(19,1) = {sw.margins[EigenIndex(19, 1)]})")
    record(4, not problems, "; ".join(problems) if problems else "all sweeps as stated")


def test_criterion_05_second_variation():
    params = GroupParams(1)
    bad = []
    for lam in (2.0, 3.0, 6.0, 8.0):
        for idx in lattice(10):
            s = second_variation_coef(lam, idx, params)
            if (idx.j, idx.k) == (0, 0):
                ok = s > 0
            elif (idx.j, idx.k) == (1, 0):
                ok = abs(s) <= 1e-12
            else:
                ok = s < 0
            if not ok:
                bad.append((lam, idx.j, idx.k, s))
    record(5, not bad, f"{4 * len(lattice(10))} coefficients checked" + (f", failures {bad[:3]}" if bad else ""))


def test_criterion_06_sharp_constants():
    worst = 0.0
    for n in (1, 2, 3):
        params = GroupParams(n)
        for lam in range(4, params.Q):
            lam = float(lam)
            forms = c_prime_forms(lam, params)
            spectral = c_prime_spectral(lam, params)
            worst = max(worst, max(abs(v / spectral - 1) for v in forms))
            c1, c2 = c_lambda_forms(lam, params)
            worst = max(worst, abs(c1 / c2 - 1))
    value = c_prime_spectral(8.0, GroupParams(1))
    hp = c_prime_mpmath(8, GroupParams(1), dps=50)
    six = mpmath.nstr(hp, 6) == f"{value:.6g}"
    record(6, worst <= 1e-12 and six,
           f"forms agree to {worst:.1e}; C'_8(n=1) = {value:.9g}, 50-digit value {mpmath.nstr(hp, 12)} "
           f"(776.98 is 3.2e-5 below both)")


def test_criterion_07_euler_lagrange():
    params = GroupParams(1)
    mc = MonteCarloConfig(200_000, 42)
    good = el_residual(ExtremizerSpec.axial(1, 0.3, 8.0), params, mc)
    bad = el_residual(lambda z: 1 + 0.5 * z.zeta[..., 0, 0], params, mc, lam=8.0)
    record(7, good.residual <= 0.02 and bad.residual > 0.05,
           f"extremizer residual {good.residual:.4f}, perturbed h = 1 + Re(zeta_1)/2 residual {bad.residual:.4f}")


def test_criterion_08_conformal_invariance():
    params = GroupParams(1)
    lam = 8.0
    p = hls_exponent(lam, params)
    ref = c_prime_spectral(lam, params)
    grid = build_grid(params, 64)
    cases = []
    ok = True
    for delta, x0 in ((2.0, 0.0), (2.0, 0.3)):
        m = ConformalMap(delta, SpherePoint.pole(1))
        f = conformal_push(ExtremizerSpec.axial(1, x0, lam), m, p)
        q_mc, se = hls_quotient_mc(f, lam, params, MonteCarloConfig(2_000_000, 42), focus=m)
        q_grid = quotient(grid, grid.from_sphere_function(f), lam)
        mc_gap, grid_gap = abs(q_mc / ref - 1), abs(q_grid / ref - 1)
        ok = ok and mc_gap <= 0.01 and grid_gap <= 1e-3
        cases.append(f"(delta={delta}, xi={x0}): MC {mc_gap:.2%} (se {se / ref:.2%}), grid {grid_gap:.1e}")
    record(8, ok, "; ".join(cases))


def test_criterion_09_optimizer():
    params = GroupParams(1)
    ref = c_prime_spectral(8.0, params)
    grid = build_grid(params, 64)
    rng = np.random.default_rng(42)
    worst_final, worst_peak = 0.0, -math.inf
    for _ in range(10):
        run = el_iterate(grid, random_zonal_start(grid, rng, amplitude=0.3), 8.0)
        worst_final = max(worst_final, abs(run.trace[-1] / ref - 1))
        worst_peak = max(worst_peak, max(run.trace) / ref - 1)
    record(9, worst_peak <= 5e-3 and worst_final <= 1e-3,
           f"10 starts: max final gap {worst_final:.1e}, max excess over C'_8 {worst_peak:.1e}")


def test_criterion_10_sobolev_logsobolev():
    notes, ok = [], True
    ratio_gap = 0.0
    for n in (1, 2, 3):
        params = GroupParams(n)
        for d in (0.5, 1.0, 2.0, 3.0, params.Q - 4.0 - 0.5):
            rep = sobolev_constants(d, params)
            ratio_gap = max(ratio_gap, abs(rep.c_d / rep.c_prime_d / 2.0 ** (params.Q - d - 3) - 1))
        d2 = abs(sobolev_constants(2.0, params).c_prime_d / sublaplacian_kernel_constant(params) - 1)
        ok = ok and d2 <= 1e-12
    ok = ok and ratio_gap <= 1e-14
    notes.append(f"c_d/c'_d ratio gap {ratio_gap:.1e}, d=2 kernel constant matches")
    params = GroupParams(1)
    C = logsob_constant(params)
    # independent 50-digit evaluation of the limit of 2 C'_lambda (Q - lambda)/Q
    with mpmath.workdps(50):
        gap = mpmath.mpf("1e-30")
        lim = 2 * c_prime_mpmath(params.Q - gap, params, dps=50) * gap / params.Q
    six = mpmath.nstr(lim, 6) == f"{C:.6g}"
    ok = ok and six
    notes.append(f"log-Sobolev C = {C:.10g}, limit {mpmath.nstr(lim, 10)}")
    rel = abs(logsob_limit_proxy(params.Q - 1e-3, params) / C - 1)
    ok = ok and rel <= 1e-4
    notes.append(f"limit consistency at lambda = Q - 1e-3: {rel:.2e} (target 1e-4; the gap is first order in Q - lambda)")
    record(10, ok, "; ".join(notes))


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
