"""Cayley transform, sphere distance, polar coordinates, conformal maps and recentering."""
import math

import numpy as np
import pytest
from scipy import integrate

from qhls.group import GroupParams, GroupPoint, dilate, dist_g, random_group_points
from qhls.inequalities import ExtremizerSpec, conformal_push, pushed_extremizer_xi
from qhls.montecarlo import MonteCarloConfig
from qhls.quaternion import vnorm2
from qhls.sphere import (
    ConformalMap, PolarAngles, SingularityError, SpherePoint, cayley, cayley_inv, center_mass, conformal_gamma,
    conformal_gamma_composite, conformal_jacobian, dist_s, dist_s_complex, jac_cayley, jac_cayley_sphere,
    map_from_ball, polar_weight, pushed_center, recenter, sample_sphere, sp_frame,
)


def _random_sphere(n, count, rng):
    return SpherePoint(rng.standard_normal((count, n + 1, 4)))


class TestCayley:
    def test_lands_on_sphere(self, params, rng):
        z = cayley(random_group_points(params.n, 100, rng))
        assert np.allclose(vnorm2(z.zeta), 1.0)

    def test_identity_goes_to_north_pole(self, params):
        u = GroupPoint.identity(params.n)
        assert np.allclose(cayley(GroupPoint(u.q[None], u.w[None])).zeta[0], SpherePoint.pole(params.n).zeta)

    def test_round_trip(self, params, rng):
        u = random_group_points(params.n, 500, rng, scale=2.0)
        back = cayley_inv(cayley(u))
        assert np.allclose(back.q, u.q, atol=1e-10) and np.allclose(back.w, u.w, atol=1e-10)

    def test_south_pole_is_singular(self, params):
        with pytest.raises(SingularityError):
            cayley_inv(SpherePoint.pole(params.n, -1.0))

    def test_distance_relation(self, params, rng):
        Q = params.Q
        u, v = random_group_points(params.n, 2000, rng), random_group_points(params.n, 2000, rng)
        lhs = dist_s(cayley(u), cayley(v))
        rhs = 2.0 ** (3.0 / Q - 1) * (jac_cayley(u) * jac_cayley(v)) ** (1 / (2 * Q)) * dist_g(u, v)
        assert np.max(np.abs(lhs / rhs - 1)) < 1e-11

    def test_jacobian_two_ways(self, params, rng):
        u = random_group_points(params.n, 500, rng)
        assert np.allclose(jac_cayley(u), jac_cayley_sphere(cayley(u)), rtol=1e-12, atol=0)

    def test_jacobian_integrates_to_area(self):
        # int_G |J_C| du = |S|; the q-integral is radial, the w-integral a 3D radial one
        params = GroupParams(1)
        Q = params.Q

        def radial(r, s):
            return 2 ** (Q - 3) * ((1 + r * r) ** 2 + s * s) ** (-Q / 2) * (2 * math.pi**2 * r**3) * (4 * math.pi * s * s)

        val, _ = integrate.dblquad(lambda s, r: radial(r, s), 0, np.inf, 0, np.inf, epsabs=1e-12, epsrel=1e-11)
        assert math.isclose(val, params.sphere_area, rel_tol=1e-8)


class TestDistance:
    def test_symmetric_and_zero_on_diagonal(self, params, rng):
        z, w = _random_sphere(params.n, 50, rng), _random_sphere(params.n, 50, rng)
        assert np.allclose(dist_s(z, w), dist_s(w, z))
        # sqrt of a rounding-level |1 - zeta.conj(zeta)| gives about 1e-8
        assert np.max(dist_s(z, z)) < 1e-7

    def test_antipodal_maximum(self, params):
        pole = SpherePoint.pole(params.n)
        assert math.isclose(float(dist_s(pole, SpherePoint.pole(params.n, -1.0))), 1.0)

    def test_complex_form_agrees(self, params, rng):
        z, w = _random_sphere(params.n, 200, rng), _random_sphere(params.n, 200, rng)
        assert np.allclose(dist_s(z, w), dist_s_complex(z, w), rtol=1e-12)


class TestSampling:
    def test_deterministic(self, params):
        a = sample_sphere(params, 1000, 3)
        b = sample_sphere(params, 1000, 3)
        assert np.array_equal(a.zeta, b.zeta)

    def test_uniform_moments(self, params):
        pts = sample_sphere(params, 40000, 5)
        assert np.allclose(vnorm2(pts.zeta), 1)
        assert np.max(np.abs(pts.flat.mean(axis=0))) < 0.02
        # E|zeta_{n+1}|^2 = 1/(n+1)
        assert abs(np.mean(np.sum(pts.last**2, axis=-1)) - 1 / (params.n + 1)) < 0.01

    def test_antithetic(self, params):
        pts = sample_sphere(params, 100, 1, antithetic=True)
        assert np.allclose(pts.zeta[:50], -pts.zeta[50:])
        with pytest.raises(ValueError):
            sample_sphere(params, 101, 1, antithetic=True)


class TestPolar:
    def test_to_sphere_unit(self, params, rng):
        n = params.n
        ang = PolarAngles(rng.uniform(0, math.pi / 2, (30, n)),
                          rng.uniform(0, 1, (30, n + 1, 3)) * np.array([math.pi, math.pi, 2 * math.pi]))
        ang.check_range()
        assert np.allclose(vnorm2(ang.to_sphere().zeta), 1.0)

    def test_weight_integrates_to_area(self, params):
        # independent 1D integrals per angle
        total = 1.0
        for i in range(1, params.n + 1):
            total *= integrate.quad(lambda t: math.sin(t) ** (4 * i - 1) * math.cos(t) ** 3, 0, math.pi / 2)[0]
        slot = integrate.quad(lambda t: math.sin(t) ** 2, 0, math.pi)[0] * 2.0 * 2 * math.pi
        total *= slot ** (params.n + 1)
        assert math.isclose(total, params.sphere_area, rel_tol=1e-12)

    def test_weight_reproduces_moment(self, params):
        # uniform angle sampling weighted by the density integrates |zeta_{n+1}|^2 to |S|/(n+1)
        n = params.n
        rng = np.random.default_rng(9)
        m = 200000
        box = (math.pi / 2) ** n * (math.pi * math.pi * 2 * math.pi) ** (n + 1)
        ang = PolarAngles(rng.uniform(0, math.pi / 2, (m, n)),
                          rng.uniform(0, 1, (m, n + 1, 3)) * np.array([math.pi, math.pi, 2 * math.pi]))
        w = polar_weight(ang, params) * box
        z = ang.to_sphere()
        est = np.mean(w * np.sum(z.last**2, axis=-1))
        assert abs(est / (params.sphere_area / (n + 1)) - 1) < 0.05

    def test_range_check(self):
        with pytest.raises(ValueError):
            PolarAngles(np.array([2.0]), np.zeros((2, 3))).check_range()


class TestConformal:
    @pytest.fixture
    def cmap(self, params, rng):
        return ConformalMap(0.6, _random_sphere(params.n, 1, rng)[0])

    def test_explicit_matches_composite(self, cmap, params, rng):
        z = _random_sphere(params.n, 200, rng)
        got = conformal_gamma(cmap, z).zeta
        ref = conformal_gamma_composite(cmap, z, sp_frame(cmap.xi)).zeta
        assert np.max(np.abs(got - ref)) < 1e-12

    def test_frame_is_unitary(self, cmap):
        from qhls.quaternion import qdot

        f = sp_frame(cmap.xi)
        gram = np.array([[qdot(a, b) for b in f] for a in f])
        assert np.allclose(gram[..., 0], np.eye(len(f)))
        assert np.allclose(gram[..., 1:], 0)

    def test_inverse(self, cmap, params, rng):
        z = _random_sphere(params.n, 100, rng)
        back = conformal_gamma(cmap.inverse(), conformal_gamma(cmap, z))
        assert np.allclose(back.zeta, z.zeta, atol=1e-12)

    def test_fixes_xi(self, cmap):
        assert np.allclose(conformal_gamma(cmap, cmap.xi).zeta, cmap.xi.zeta)

    def test_jacobian_chain_rule(self, params, rng):
        # along the pole axis the map is C S_delta C^{-1}, so J = J_C(delta u) delta^Q / J_C(u)
        delta = 1.8
        m = ConformalMap(delta, SpherePoint.pole(params.n))
        z = _random_sphere(params.n, 100, rng)
        u = cayley_inv(z)
        chain = jac_cayley(dilate(delta, u)) * delta**params.Q / jac_cayley(u)
        assert np.allclose(conformal_jacobian(m, z), chain, rtol=1e-12)

    def test_jacobian_has_unit_mean(self, cmap, params):
        pts = sample_sphere(params, 200000, 2)
        assert abs(np.mean(conformal_jacobian(cmap, pts)) - 1) < 0.05

    def test_push_of_constant_is_extremizer(self, params, rng):
        lam = 8.0
        p = 2 * params.Q / (2 * params.Q - lam)
        m = ConformalMap(0.5, _random_sphere(params.n, 1, rng)[0])
        pushed = conformal_push(lambda z: np.ones(z.zeta.shape[:-2]), m, p)
        spec = ExtremizerSpec(pushed_extremizer_xi(m), lam)
        z = _random_sphere(params.n, 50, rng)
        ratio = pushed(z) / spec(z)
        assert np.allclose(ratio, ratio[0], rtol=1e-11)

    def test_bad_delta(self, params):
        with pytest.raises(ValueError):
            ConformalMap(-1.0, SpherePoint.pole(params.n))


class TestRecenter:
    def test_center_mass_validation(self, params):
        pts = SpherePoint(np.stack([SpherePoint.pole(params.n).zeta] * 2))
        with pytest.raises(ValueError):
            center_mass(pts, [1.0, -1.0])
        with pytest.raises(ValueError):
            center_mass(pts, [0.0, 0.0])

    def test_map_from_ball(self):
        assert map_from_ball(np.zeros(8), 1).delta == 1.0
        with pytest.raises(ValueError):
            map_from_ball(np.array([1.0] + [0.0] * 7), 1)

    def test_constant_density(self):
        res = recenter(lambda z: np.ones(z.zeta.shape[0]), GroupParams(1), MonteCarloConfig(1 << 12))
        assert res.map.delta == 1.0 and res.residual < 1e-12

    def test_recenters_extremizer(self):
        params = GroupParams(1)
        lam = 8.0
        p = 2 * params.Q / (2 * params.Q - lam)
        spec = ExtremizerSpec.axial(1, 0.4, lam)
        res = recenter(lambda z: spec(z) ** p, params, MonteCarloConfig(1 << 14))
        assert res.residual <= 1e-3
        # analytic answer: xi = -e_{n+1}, delta^2 = (1 - 0.4) / (1 + 0.4)
        assert res.map.xi.zeta[-1, 0] < -0.99
        assert abs(res.map.delta - math.sqrt(0.6 / 1.4)) < 0.03
        # pushed density is centered on an independent sample too (loose: Monte Carlo)
        pts = sample_sphere(params, 200000, 77)
        assert np.linalg.norm(pushed_center(spec(pts) ** p, pts, res.map)) < 0.05
