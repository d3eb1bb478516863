import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from boltzlandau import EvalConfig, SmoothField
from boltzlandau.fields import maxwellian, maxwellian_times
from boltzlandau.geometry import gauss_hermite_3d
from boltzlandau.kernel import ParameterError, SingularInputError
from boltzlandau.landau import (
    estimate_QL,
    eval_QL,
    eval_QL_divergence,
    landau_matrix,
    matrix_convolutions,
    weak_QL,
)

POINTS = np.array([[0.0, 0.0, 0.0], [0.5, -0.3, 0.2], [1.2, 0.4, -0.8], [-0.7, 1.1, 0.3], [2.0, 0.0, 0.0],
                   [0.1, -1.5, 0.9], [-1.0, -1.0, -1.0], [0.3, 0.3, 2.2], [-2.4, 0.5, 0.0], [0.8, 0.8, 0.8]])


class TestMatrix:
    def test_coulomb_example(self):
        assert_allclose(landau_matrix(-3.0, [1.0, 0, 0]), math.pi * np.diag([0, 1, 1]), atol=1e-15)

    def test_projection_identities(self, rng):
        z = rng.normal(size=(10_000, 3)) * rng.uniform(0.1, 3, size=(10_000, 1))
        for gamma in [0.0, -2.0, -3.0, -4.5]:
            a = landau_matrix(gamma, z)
            r = np.linalg.norm(z, axis=1)
            assert np.max(np.abs(np.einsum("nij,nj->ni", a, z)) / (r ** (gamma + 3))[:, None]) <= 1e-13
            assert_allclose(np.trace(a, axis1=1, axis2=2), 2 * math.pi * r ** (gamma + 2), rtol=1e-13)
            assert_allclose(a, np.swapaxes(a, 1, 2), atol=0)

    @given(st.tuples(*[st.floats(-3, 3)] * 3), st.floats(-4.9, 0.0))
    def test_eigenvalues(self, z, gamma):
        z = np.array(z)
        r = np.linalg.norm(z)
        if r < 1e-3:
            return
        ev = np.linalg.eigvalsh(landau_matrix(gamma, z))
        assert_allclose(ev, [0.0, math.pi * r ** (gamma + 2), math.pi * r ** (gamma + 2)],
                        atol=1e-12 * math.pi * r ** (gamma + 2))

    def test_singular(self):
        with pytest.raises(SingularInputError):
            landau_matrix(-2.0, np.zeros(3))


@pytest.mark.parametrize("gamma", [0.0, -2.0, -3.0, -4.0])
def test_maxwellian_equilibrium(gamma):
    cfg = EvalConfig()
    mu = maxwellian()
    vals = [eval_QL(gamma, mu, mu, v, cfg) for v in POINTS]
    assert np.max(np.abs(vals)) <= 10 * cfg.tol


@pytest.mark.parametrize("gamma", [0.0, -2.0, -3.0])
def test_divergence_form_oracle(pair, gamma):
    g, h = pair
    for v in POINTS[1:6]:
        assert_allclose(eval_QL_divergence(gamma, g, h, v), eval_QL(gamma, g, h, v), rtol=1e-3)


def test_weak_conservation_by_pointwise_quadrature():
    f = maxwellian_times({(0, 0, 0): 1.0, (1, 0, 0): 0.1, (0, 2, 0): 0.05})
    z, w = gauss_hermite_3d(8)
    c = 0.5
    v = z / math.sqrt(c)
    W = w * c**-1.5 * np.exp(np.sum(z * z, axis=1))
    q = np.array([eval_QL(-2.0, f, f, x) for x in v])
    for phi in [np.ones(len(v)), v[:, 0], v[:, 1], v[:, 2], np.sum(v * v, axis=1)]:
        assert abs(np.sum(W * q * phi)) <= 1e-4 * np.sum(W * np.abs(q * phi))


@pytest.mark.parametrize("gamma", [0.0, -2.0, -3.0, -4.0])
def test_weak_conservation_pair_rule(gamma):
    f = SmoothField.gaussian(width=0.5, center=(0.3, 0, 0)) + SmoothField.gaussian({(0, 1, 0): 0.2}, width=0.7)
    for phi in [{(1, 0, 0): 1.0}, {(0, 0, 1): 1.0}, {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0}]:
        val, scale = weak_QL(gamma, f, f, phi, return_scale=True)
        assert abs(val) <= 1e-6 * scale
    assert weak_QL(gamma, f, f, {(0, 0, 0): 1.0}) == 0.0


def test_weak_against_pointwise_moment(pair):
    # <Q_L(g, h), v1^2> two ways: pair-rule weak form and quadrature of the pointwise values
    g, h = pair
    weak = weak_QL(0.0, g, h, {(2, 0, 0): 1.0})
    z, w = gauss_hermite_3d(8)
    c = 0.4
    v = z / math.sqrt(c)
    W = w * c**-1.5 * np.exp(np.sum(z * z, axis=1))
    q = np.array([eval_QL(0.0, g, h, x) for x in v])
    assert_allclose(np.sum(W * q * v[:, 0] ** 2), weak, rtol=1e-4)


def test_convolution_symmetric(pair):
    g, _ = pair
    conv = matrix_convolutions(-2.0, g, np.array([0.3, 0.1, -0.2]), EvalConfig(), need=("g",))
    assert_allclose(conv["g"], conv["g"].T, atol=0)


def test_continuity_across_coulomb_exponent(pair):
    g, h = pair
    for v in POINTS[1:4]:
        lo, hi = eval_QL(-3.001, g, h, v), eval_QL(-2.999, g, h, v)
        assert abs(lo - hi) < 0.01 * abs(eval_QL(-3.0, g, h, v))


def test_estimate_and_domain(pair):
    g, h = pair
    value, err = estimate_QL(-2.0, g, h, np.array([0.2, 0.1, 0.3]))
    assert err <= 1e-6
    with pytest.raises(ParameterError):
        eval_QL(-5.0, g, h, np.zeros(3))
    with pytest.raises(ParameterError):
        eval_QL(0.5, g, h, np.zeros(3))
