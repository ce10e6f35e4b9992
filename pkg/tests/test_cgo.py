import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lamekit import CoeffSeq, NumericalError
from lamekit.cgo import (
    CgoField,
    SectorGeom,
    arm_integrals,
    boundary_integrals,
    composite_gauss,
    eval_v,
    i3_bound,
    numerical_remainders,
    remainder_bounds,
    sector_tail_bound,
    sector_v1_integral_closed,
    sector_v1_integral_numeric,
    traction_v,
    traction_v_on_arm,
    volume_bound,
    weighted_r_integral,
    weighted_r_integral_leading,
    zeta,
)
from lamekit.lame_core import E1, arm_normal, navier_residual_fd, traction_from_grad

HALF_STEPS = [k / 2 for k in range(7)]


def cartesian_v(f):
    def field(x1, x2):
        return eval_v(f, np.hypot(x1, x2), np.arctan2(x2, x1))
    return field


class TestField:
    def test_origin(self):
        np.testing.assert_array_equal(eval_v(CgoField(3.0), 0.0, 1.2), E1)

    def test_positive_axis(self):
        f = CgoField(2.0)
        decay = math.exp(-2.0 * math.sqrt(0.3))
        np.testing.assert_allclose(eval_v(f, 0.3, 0.0), [decay, 1j * decay], rtol=1e-15)

    def test_modulus(self):
        v = eval_v(CgoField(4.0), 1.0, math.pi / 2)
        assert abs(v[0]) == pytest.approx(math.exp(-4.0 * math.cos(math.pi / 4)), rel=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.1, 50), st.floats(0, 5), st.floats(-math.pi, math.pi))
    def test_modulus_bounded(self, s, r, phi):
        assert abs(eval_v(CgoField(s), r, phi)[0]) <= 1.0 + 1e-15

    def test_lame_harmonic(self, params, rng):
        f = CgoField(3.0)
        r = rng.uniform(0.1, 1.0, 20)
        phi = rng.uniform(-0.9 * math.pi, 0.9 * math.pi, 20)
        res = navier_residual_fd(cartesian_v(f), params, r * np.cos(phi), r * np.sin(phi), kappa=0.0)
        assert np.max(np.abs(res)) < 1e-5

    def test_invalid_parameter(self):
        for bad in (0.0, -1.0, math.inf):
            with pytest.raises(ValueError):
                CgoField(bad)


class TestTraction:
    def test_minus_unit_values(self, params):
        f = CgoField(1.0)
        np.testing.assert_allclose(traction_v_on_arm(f, params, "minus", 1.0),
                                   1j * math.exp(-1.0) * E1, rtol=1e-15)

    def test_plus_limit(self, params):
        f = CgoField(2.0)
        r = 0.4
        lim = 1j * f.s * params.mu * (-1) * math.exp(-f.s * math.sqrt(r)) / math.sqrt(r) * E1
        np.testing.assert_allclose(traction_v_on_arm(f, params, "plus", r, 1e-8), lim, rtol=1e-7)

    def test_matches_general_formula(self, params):
        f = CgoField(5.0)
        r = np.linspace(0.05, 0.5, 6)
        for phi0 in (0.4, 1.3, 2.9):
            np.testing.assert_allclose(traction_v_on_arm(f, params, "plus", r, phi0),
                                       traction_v(f, params, r, phi0, arm_normal("plus", phi0)), rtol=1e-13)
        np.testing.assert_allclose(traction_v_on_arm(f, params, "minus", r),
                                   traction_v(f, params, r, 0.0, arm_normal("minus")), rtol=1e-13)

    def test_finite_difference_oracle(self, params, rng):
        for _ in range(5):
            s, r, phi0 = rng.uniform(1, 8), rng.uniform(0.1, 1.0), rng.uniform(0.2, 2.8)
            f = CgoField(s)
            field = cartesian_v(f)
            x1, x2 = r * math.cos(phi0), r * math.sin(phi0)
            h = 1e-5
            grad = np.stack([(field(x1 + h, x2) - field(x1 - h, x2)) / (2 * h),
                             (field(x1, x2 + h) - field(x1, x2 - h)) / (2 * h)], axis=-1)
            fd = traction_from_grad(grad, params, arm_normal("plus", phi0))
            exact = traction_v_on_arm(f, params, "plus", r, phi0)
            assert np.max(np.abs(fd - exact)) < 1e-6 * (1 + np.max(np.abs(exact)))

    def test_vertex_excluded(self, params):
        with pytest.raises(ValueError):
            traction_v_on_arm(CgoField(1.0), params, "minus", 0.0)


class TestWeightedIntegral:
    def test_ell_zero_closed_form(self):
        s, h = 7.0, 0.3
        expected = 2 / s**2 * (1 - math.exp(-s * math.sqrt(h)) * (1 + s * math.sqrt(h)))
        got = weighted_r_integral(0, CgoField(s), -1.0, h)
        assert got == pytest.approx(expected, rel=1e-14)
        quad, _ = integrate.quad(lambda r: math.exp(-s * math.sqrt(r)), 0, h, epsabs=1e-15, epsrel=1e-14)
        assert got.real == pytest.approx(quad, rel=1e-12)

    @pytest.mark.parametrize("ell", HALF_STEPS)
    def test_leading_asymptotics(self, ell):
        f = CgoField(1e3)
        ratio = weighted_r_integral(ell, f, -1.0, 1.0) / weighted_r_integral_leading(ell, f, -1.0)
        assert abs(ratio - 1) < 1e-6

    @pytest.mark.parametrize("ell", HALF_STEPS)
    def test_quadrature(self, ell):
        f = CgoField(50.0)
        z = -np.exp(1j * math.pi / 6)
        t, w = composite_gauss(0.0, math.sqrt(0.5), 10_000)
        quad = np.sum(w * 2 * t ** (2 * ell + 1) * np.exp(f.s * t * z))
        closed = weighted_r_integral(ell, f, z, 0.5)
        assert abs(closed - quad) < 1e-10 * abs(closed)

    def test_rejects_growing_exponent(self):
        with pytest.raises(ValueError):
            weighted_r_integral(1, CgoField(1.0), 0.5j, 1.0)
        with pytest.raises(ValueError):
            weighted_r_integral(0.25, CgoField(1.0), -1.0, 1.0)

    def test_composite_gauss_exact_for_polynomials(self):
        x, w = composite_gauss(-1.0, 2.0, 40)
        assert np.sum(w * x**5) == pytest.approx((2.0**6 - 1.0) / 6, rel=1e-14)


def _geom():
    return SectorGeom(math.pi / 3, 0.4)


class TestBoundaryIdentity:
    def test_zero(self, params):
        bi = boundary_integrals(CoeffSeq.zeros(6), params, _geom(), CgoField(20.0))
        assert bi.identity_residual == 0.0
        assert bi.I1_plus == bi.I1_minus == bi.I2 == bi.I3 == 0

    def test_identity(self, params, rng):
        c = CoeffSeq.random(6, rng)
        bi = boundary_integrals(c, params, _geom(), CgoField(20.0))
        scale = 1 + max(abs(bi.I1_plus), abs(bi.I1_minus), abs(bi.I2), abs(bi.I3))
        assert bi.identity_residual < 1e-8 * scale

    @pytest.mark.parametrize("phi0", [math.pi / 6, math.pi / 2, 5 * math.pi / 6])
    def test_identity_other_angles(self, params, rng, phi0):
        c = CoeffSeq.random(5, rng)
        bi = boundary_integrals(c, params, SectorGeom(phi0, 0.3), CgoField(10.0))
        assert bi.identity_residual < 1e-8 * (1 + abs(bi.I3) + abs(bi.I2) + abs(bi.I1_plus))

    def test_arc_decay(self, params, rng):
        c = CoeffSeq.random(6, rng)
        g = _geom()
        s_vals = np.array([10.0, 20.0, 40.0, 80.0])
        logs = [math.log(abs(boundary_integrals(c, params, g, CgoField(s)).I2)) for s in s_vals]
        slope = np.polyfit(s_vals, logs, 1)[0]
        assert slope <= -0.9 * g.delta * math.sqrt(g.h)

    def test_quadrature_guard(self, params, rng):
        c = CoeffSeq.random(6, rng)
        # 64 nodes cannot resolve the e^{-s t} boundary layer at s = 500
        with pytest.raises(NumericalError):
            boundary_integrals(c, params, _geom(), CgoField(500.0), quad_n=64)
        with pytest.raises(ValueError):
            boundary_integrals(c, params, _geom(), CgoField(1.0), quad_n=32)

    def test_endpoint_limits_shrink(self, params, rng):
        c = CoeffSeq.random(6, rng)
        # s^2 eps h << 1 puts the segments inside the vertex regime
        f, g = CgoField(1.0), _geom()
        for side in ("plus", "minus"):
            vals = [arm_integrals(c, params, f, side, g.phi0, eps * g.h, 64) for eps in (0.1, 0.05, 0.025)]
            for key in ("tu_v", "tv_u", "u_v"):
                mags = [abs(v[key]) for v in vals]
                assert mags[1] <= 0.55 * mags[0] and mags[2] <= 0.55 * mags[1]


class TestBounds:
    @pytest.mark.parametrize("s", [20.0, 40.0, 80.0])
    def test_i3_bound(self, params, rng, s):
        c = CoeffSeq.random(6, rng)
        g = _geom()
        f = CgoField(s)
        assert abs(boundary_integrals(c, params, g, f).I3) <= i3_bound(c, params, g, f)

    def test_sector_integral(self):
        for s in (10.0, 20.0, 40.0):
            for phi0 in (math.pi / 6, math.pi / 3, math.pi / 2):
                f = CgoField(s)
                val, radius = sector_v1_integral_numeric(f, phi0)
                closed = sector_v1_integral_closed(f, phi0)
                assert abs(val - closed) <= 1e-6 * abs(closed)
                assert sector_tail_bound(f, phi0, radius) <= 1e-10 * s**-4 * (1 + 1e-9)

    def test_volume_bound(self):
        f, phi0 = CgoField(15.0), math.pi / 3
        val, _ = sector_v1_integral_numeric(f, phi0)
        assert abs(val) <= volume_bound(0.0, f, phi0)


class TestRemainders:
    def test_zero(self, params):
        b = remainder_bounds(CoeffSeq.zeros(6), params, 1.0, 0.2)
        assert all(v == 0 for v in (b.S0, b.S1, b.S2, b.S3, b.S0_hat, b.S3_hat, b.S1_ell))

    def test_single_mode_resum(self, params):
        """S2 for a_0 = 1 from an independent term-by-term loop."""
        kp, lam, mu, h = params.kp, params.lam, params.mu, 0.2

        def coef(k, m):
            return kp ** (2 * k + m) / (2 ** (2 * k + m) * math.factorial(k) * math.factorial(k + m))

        expected = (kp**2 * (lam + mu) * sum(coef(k, 0) * h ** (2 * k - 3) for k in range(2, 60))
                    + kp**2 * mu * sum(coef(k, 2) * h ** (2 * k - 1) for k in range(1, 60)))
        got = remainder_bounds(CoeffSeq.single(6, "a", 0), params, 1.0, h).S2
        assert got == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("side", ["minus", "plus"])
    def test_domination(self, params, rng, side):
        h, phi0 = 0.3, math.pi / 3
        r = np.linspace(h / 10, h, 10)
        for _ in range(3):
            c = CoeffSeq.random(8, rng)
            S = remainder_bounds(c, params, phi0, h)
            R = numerical_remainders(c, params, side, r, phi0)
            assert np.all(np.abs(R["R1"]) <= r**3 * S.S2)
            assert np.all(np.abs(R["R2"]) <= r**3.5 * S.S3)
            assert np.all(np.abs(R["R0"]) <= r**2 * S.S0)

    @pytest.mark.parametrize("ell", [1, 2, 3])
    def test_shifted_domination(self, params, rng, ell):
        h, phi0 = 0.3, 2.0
        r = np.linspace(h / 10, h, 10)
        c = CoeffSeq.random(8, rng)
        c.a[:ell] = 0
        c.b[:ell] = 0
        S = remainder_bounds(c, params, phi0, h, ell)
        for side in ("minus", "plus"):
            R = numerical_remainders(c, params, side, r, phi0, ell)
            assert np.all(np.abs(R["R2_hat"]) <= r ** (ell + 3.5) * S.S3_hat)
            assert np.all(np.abs(R["R0_hat"]) <= r ** (ell + 2) * S.S0_hat)

    def test_remainders_are_higher_order(self, params, rng):
        c = CoeffSeq.random(6, rng)
        r = np.array([1e-3, 2e-3])
        R = numerical_remainders(c, params, "minus", r)
        # R0 is O(r^2): halving r divides it by about four
        assert abs(R["R0"][1] / R["R0"][0]) == pytest.approx(4.0, rel=0.05)
