"""Group law, homogeneous norm, dilations and the group extremizers."""
import numpy as np
import pytest

from qhls.group import (
    GroupParams, GroupPoint, dilate, dist_g, extremizer_g, group_extremizer_params, group_inv, group_mul,
    hom_norm, random_group_points, standard_bubble,
)
from qhls.quaternion import DimensionError


class TestParams:
    @pytest.mark.parametrize("n, Q", [(1, 10), (2, 14), (3, 18)])
    def test_homogeneous_dimension(self, n, Q):
        assert GroupParams(n).Q == Q

    def test_sphere_area_n1(self):
        # S^7 has area pi^4 / 3
        assert np.isclose(GroupParams(1).sphere_area, np.pi**4 / 3, rtol=1e-15)

    @pytest.mark.parametrize("bad", [0, -1, 1.5])
    def test_rejects_bad_n(self, bad):
        with pytest.raises(ValueError):
            GroupParams(bad)


class TestGroupLaw:
    def test_identity_and_inverse(self, params, rng):
        u = random_group_points(params.n, 20, rng)
        e = GroupPoint(np.zeros_like(u.q), np.zeros_like(u.w))
        v = group_mul(u, e)
        assert np.allclose(v.q, u.q) and np.allclose(v.w, u.w)
        z = group_mul(u, group_inv(u))
        assert np.allclose(z.q, 0) and np.allclose(z.w, 0)

    def test_associative(self, params, rng):
        a, b, c = (random_group_points(params.n, 20, rng) for _ in range(3))
        lhs = group_mul(group_mul(a, b), c)
        rhs = group_mul(a, group_mul(b, c))
        assert np.allclose(lhs.q, rhs.q) and np.allclose(lhs.w, rhs.w)

    def test_dilation_is_automorphism(self, params, rng):
        a, b = random_group_points(params.n, 20, rng), random_group_points(params.n, 20, rng)
        lhs = dilate(1.7, group_mul(a, b))
        rhs = group_mul(dilate(1.7, a), dilate(1.7, b))
        assert np.allclose(lhs.q, rhs.q) and np.allclose(lhs.w, rhs.w)

    def test_norm_homogeneous(self, params, rng):
        a = random_group_points(params.n, 50, rng)
        assert np.allclose(hom_norm(dilate(0.3, a)), 0.3 * hom_norm(a))

    def test_distance_left_invariant(self, params, rng):
        a, b, g = (random_group_points(params.n, 30, rng) for _ in range(3))
        assert np.allclose(dist_g(group_mul(g, a), group_mul(g, b)), dist_g(a, b))

    def test_distance_matches_norm(self, params, rng):
        a, b = random_group_points(params.n, 30, rng), random_group_points(params.n, 30, rng)
        assert np.allclose(dist_g(a, b), hom_norm(group_mul(group_inv(b), a)))

    def test_mismatched_dimension(self, rng):
        with pytest.raises(DimensionError):
            group_mul(random_group_points(1, 2, rng), random_group_points(2, 2, rng))

    def test_bad_dilation(self, rng):
        with pytest.raises(ValueError):
            dilate(0.0, random_group_points(1, 2, rng))


class TestGroupExtremizer:
    def test_bubble_is_special_case(self, params, rng):
        u = random_group_points(params.n, 20, rng)
        q0 = np.zeros((params.n, 4))
        r0 = np.array([1.0, 0, 0, 0])
        assert np.allclose(extremizer_g(u, q0, r0, 8.0), standard_bubble(u, 8.0))

    def test_translated_dilated_bubble(self, params, rng):
        u = random_group_points(params.n, 40, rng)
        u0 = random_group_points(params.n, 1, rng)[0]
        delta = 1.4
        lam = 6.0
        shifted = dilate(delta, group_mul(group_inv(GroupPoint(u0.q[None], u0.w[None])), u))
        q0, r0 = group_extremizer_params(delta, u0)
        ratio = standard_bubble(shifted, lam) / extremizer_g(u, q0, r0, lam)
        assert np.allclose(ratio, ratio[0], rtol=1e-10)

    def test_requires_positive_real_part(self):
        u = GroupPoint.identity(1)
        with pytest.raises(ValueError):
            extremizer_g(GroupPoint(u.q[None], u.w[None]), np.ones((1, 4)), np.array([1.0, 0, 0, 0]), 8.0)
