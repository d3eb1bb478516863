import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from boltzlandau import EvalConfig, KernelParams, SmoothField
from boltzlandau.boltzmann import (
    ToleranceError,
    cancellation_convolution,
    cancellation_direct,
    estimate_Q,
    eval_Q,
    eval_Q_far,
    eval_Q_near,
    weak_Q,
)
from boltzlandau.fields import Polynomial, maxwellian, maxwellian_times
from boltzlandau.geometry import gauss_hermite_3d
from boltzlandau.kernel import OperatorGradeError, ParameterError

SAMPLE = np.array(
    [[0.0, 0.0, 0.0], [0.5, -0.3, 0.2], [1.2, 0.4, -0.8], [-0.7, 1.1, 0.3], [2.0, 0.0, 0.0],
     [0.1, -1.5, 0.9], [-1.0, -1.0, -1.0], [0.3, 0.3, 2.2], [-2.4, 0.5, 0.0], [0.8, 0.8, 0.8]]
)
PHIS = {
    "v1": {(1, 0, 0): 1.0},
    "v2": {(0, 1, 0): 1.0},
    "v3": {(0, 0, 1): 1.0},
    "energy": {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0},
}


@pytest.mark.parametrize("params", [KernelParams(0.5, 0.0), KernelParams(0.8, -2.0), KernelParams(0.3, -3.5)])
def test_maxwellian_equilibrium(params):
    cfg = EvalConfig()
    mu = maxwellian()
    vals = [eval_Q(params, mu, mu, v, cfg) for v in SAMPLE]
    assert np.max(np.abs(vals)) <= 10 * cfg.tol


def test_bilinear(pair, rng):
    g, h = pair
    h2 = SmoothField.gaussian({(2, 0, 0): 0.4}, width=0.9, center=(0.0, 0.5, 0.0))
    p = KernelParams(0.6, -1.5)
    for v in rng.normal(size=(3, 3)):
        lhs = eval_Q(p, g, h + h2, v)
        rhs = eval_Q(p, g, h, v) + eval_Q(p, g, h2, v)
        assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-12)
        assert_allclose(eval_Q(p, g.scale(2.5), h, v), 2.5 * eval_Q(p, g, h, v), rtol=1e-12)


def test_maxwell_molecule_oracle():
    # for gamma = 0, Q(mu, mu v1) stays in span{v1 mu}, so the weak coefficient fixes every value
    p = KernelParams(0.5, 0.0)
    mu = maxwellian()
    h = mu + maxwellian_times({(1, 0, 0): 1.0})
    coef = weak_Q(p, mu, h, {(1, 0, 0): 1.0})
    assert coef < 0
    for v in SAMPLE[:5]:
        expected = coef * v[0] * mu.eval(v)
        assert_allclose(eval_Q(p, mu, h, v), expected, atol=1e-8)


class TestWeakForm:
    def test_constant_is_exact_zero(self, pair):
        g, h = pair
        assert weak_Q(KernelParams(0.5, -1.0), g, h, {(0, 0, 0): 1.0}) == 0.0
        assert weak_Q(KernelParams(0.5, -1.0), g, h, Polynomial.constant(3.0), return_scale=True) == (0.0, 0.0)

    @pytest.mark.parametrize("params", [KernelParams(0.5, 0.0), KernelParams(0.9, -2.0), KernelParams(0.2, -3.2)])
    @pytest.mark.parametrize("name", sorted(PHIS))
    def test_conservation(self, params, name):
        f = maxwellian_times({(0, 0, 0): 1.0, (1, 0, 0): 0.1})
        val, scale = weak_Q(params, f, f, PHIS[name], return_scale=True)
        assert scale > 0
        assert abs(val) <= 1e-6 * scale

    def test_conservation_off_centre_mixture(self):
        f = SmoothField.gaussian(width=0.5, center=(0.4, 0, 0)) + SmoothField.gaussian(width=0.8, center=(-0.3, 0.2, 0))
        for phi in PHIS.values():
            val, scale = weak_Q(KernelParams(0.7, -1.0), f, f, phi, return_scale=True)
            assert abs(val) <= 1e-6 * scale

    @pytest.mark.slow
    def test_weak_against_pointwise(self, pair, coarse):
        g, h = pair
        p = KernelParams(0.4, -1.0)
        phi = SmoothField.gaussian({(0, 0, 0): 1.0, (0, 0, 1): 0.5}, width=0.5, center=(0.1, 0.2, 0.0))
        z, w = gauss_hermite_3d(10)
        c = 0.7
        v = z / math.sqrt(c)
        q = np.array([eval_Q(p, g, h, x, coarse) for x in v])
        pointwise = np.sum(w * c**-1.5 * np.exp(c * np.sum(v * v, axis=1)) * q * phi.eval(v))
        assert_allclose(pointwise, weak_Q(p, g, h, phi), rtol=1e-4)


class TestSplitting:
    def test_near_plus_far(self, pair, coarse, rng):
        g, h = pair
        p = KernelParams(0.6, -2.0, 0.8)
        for v in rng.uniform(-2, 2, size=(20, 3)):
            full = eval_Q(p, g, h, v, coarse)
            parts = eval_Q_near(p, g, h, v, coarse) + eval_Q_far(p, g, h, v, coarse)
            assert_allclose(parts, full, rtol=1e-6, atol=1e-9)

    def test_near_part_shrinks_with_eta(self, pair):
        g, h = pair
        s, gamma = 0.5, -1.0
        etas = np.array([1.0, 0.5, 0.25, 0.125])
        v = np.array([0.2, 0.1, 0.3])
        near = [abs(eval_Q_near(KernelParams(s, gamma, e), g, h, v)) for e in etas]
        slope = np.polyfit(np.log(etas), np.log(near), 1)[0]
        assert slope >= 0.9 * (gamma + 2 * s + 3)
        full = eval_Q(KernelParams(s, gamma), g, h, v)
        far = eval_Q_far(KernelParams(s, gamma, 0.125), g, h, v)
        assert abs(far - full) <= 1e-2 * abs(full)

    def test_near_part_vanishes_for_separated_supports(self):
        g = SmoothField.gaussian(width=8.0, center=(3.0, 0.0, 0.0))
        h = SmoothField.gaussian(width=8.0)
        p = KernelParams(0.5, -1.0, 1.0)
        v = np.zeros(3)
        assert abs(eval_Q_near(p, g, h, v)) <= 1e-8 * abs(eval_Q(p, g, h, v)) + 1e-12
        assert abs(eval_Q(p, g, h, v)) > 1e-6

    def test_split_mode_disabled_for_parts(self, pair):
        g, h = pair
        with pytest.raises(ParameterError):
            eval_Q_near(KernelParams(0.5, -1.0), g, h, np.zeros(3), EvalConfig(mode="split"))


class TestModes:
    def test_split_matches_compensated(self, pair):
        g, h = pair
        p = KernelParams(0.7, -1.0)
        v = np.array([0.3, -0.4, 0.1])
        a = eval_Q(p, g, h, v)
        b = eval_Q(p, g, h, v, EvalConfig(mode="split"))
        assert_allclose(b, a, rtol=1e-6)

    def test_naive_mode_small_s(self, pair):
        g, h = pair
        p = KernelParams(0.2, 0.0)
        v = np.array([0.3, -0.4, 0.1])
        a = eval_Q(p, g, h, v)
        b = eval_Q(p, g, h, v, EvalConfig(mode="naive"))
        assert_allclose(b, a, rtol=0.05)

    def test_mode_guards(self, pair):
        g, h = pair
        with pytest.raises(ParameterError):
            eval_Q(KernelParams(0.6, 0.0), g, h, np.zeros(3), EvalConfig(mode="naive"))
        with pytest.raises(ParameterError):
            eval_Q(KernelParams(0.6, -3.5), g, h, np.zeros(3), EvalConfig(mode="split"))
        with pytest.raises(OperatorGradeError):
            eval_Q(KernelParams(0.1, -3.5), g, h, np.zeros(3))
        with pytest.raises(ValueError):
            EvalConfig(tol=0.0)


class TestRefinement:
    def test_refinement_reduces_error(self, pair, coarse):
        g, h = pair
        p = KernelParams(0.7, -2.0)
        v = np.array([0.4, 0.2, -0.5])
        ref = eval_Q(p, g, h, v, coarse.refined().refined().refined())
        e0 = abs(eval_Q(p, g, h, v, coarse) - ref)
        e1 = abs(eval_Q(p, g, h, v, coarse.refined()) - ref)
        assert e1 <= 0.5 * e0

    def test_estimate_and_strict(self, pair, coarse):
        g, h = pair
        p = KernelParams(0.5, -1.0)
        v = np.array([0.2, 0.1, 0.3])
        value, err = estimate_Q(p, g, h, v)
        assert err <= 1e-6
        assert_allclose(value, eval_Q(p, g, h, v, EvalConfig().refined()), rtol=1e-15)
        with pytest.raises(ToleranceError):
            eval_Q(p, g, h, v, EvalConfig(n_first=4, n_panel=3, n_polar=3, n_azimuth=4, n_w=2, n_phi=2,
                                          tol=1e-12, strict=True))


def test_cancellation_routes_agree(pair):
    g, h = pair
    p = KernelParams(0.9, -2.5, 0.5)
    direct = cancellation_direct(p, g, h)
    conv = cancellation_convolution(p, g, h)
    assert_allclose(conv, direct, rtol=1e-4)
