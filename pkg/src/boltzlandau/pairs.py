"""Quadrature for double integrals ``int int F(v, v_star) dv dv_star``.

The integrals handled here carry a product ``g(v_star) h(v)`` of two Gaussian
terms.  In centre-of-mass coordinates ``V = (v + v_star)/2``,
``u = v - v_star`` the product factorizes as

    exp(-A |V - m(u)|^2) * exp(-a_eff |u - d|^2) * polynomial,

with ``A = a + b``, ``a_eff = a b / A``, ``d = p - q`` and
``m(u) = (a p + b q)/A - (a - b) u / (2 A)`` for widths ``a`` (term on ``v``,
centre ``p``) and ``b`` (term on ``v_star``, centre ``q``).  The rule is
tensor Gauss-Hermite in ``V`` around ``m(u)``, generalized Gauss-Laguerre in
``t = a_eff |u|^2`` and an antipodally symmetric direction rule for ``u/|u|``.
It is exact for polynomial data with ``d = 0`` once the node counts cover
the polynomial degree.

Weights are *plain*: they multiply the full integrand, Gaussians included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import GaussianTerm
from .geometry import build_direction_rule, gauss_hermite_3d, gauss_laguerre


@dataclass(frozen=True)
class PairRuleSpec:
    n_V: int = 7
    n_r: int = 5
    n_polar: int = 7
    n_azimuth: int = 14
    radial_power: float = 4.0  # extracted power is r^(gamma + radial_power)

    def refined(self) -> "PairRuleSpec":
        return PairRuleSpec(self.n_V + 3, 2 * self.n_r, self.n_polar + 4, self.n_azimuth + 8, self.radial_power)


@dataclass(frozen=True)
class PairNodes:
    """Flattened node set; index order is (radial, direction, V)."""

    v: np.ndarray
    v_star: np.ndarray
    r: np.ndarray  # per (radial, direction) block
    u_hat: np.ndarray  # per (radial, direction) block
    weights: np.ndarray  # per (radial, direction, V)
    n_V: int


def pair_nodes(term_h: GaussianTerm, term_g: GaussianTerm, gamma: float, spec: PairRuleSpec) -> PairNodes:
    """Nodes for the pair (``term_h`` on ``v``, ``term_g`` on ``v_star``)."""
    a, b = term_h.width, term_g.width
    p, q = np.asarray(term_h.center), np.asarray(term_g.center)
    A = a + b
    ae = a * b / A
    beta = gamma + spec.radial_power
    alpha = 0.5 * (beta - 1.0)
    t, wt = gauss_laguerre(spec.n_r, alpha)
    r = np.sqrt(t / ae)
    # plain radial weights for int_0^inf f(r) dr
    wr = 0.5 * ae ** (-(beta + 1.0) / 2.0) * wt * r ** (-beta) * np.exp(t)
    dirs = build_direction_rule(spec.n_polar, spec.n_azimuth)
    z, wz = gauss_hermite_3d(spec.n_V)
    wz_plain = wz * np.exp(np.einsum("ij,ij->i", z, z)) * A**-1.5
    # u blocks
    u = r[:, None, None] * dirs.directions[None, :, :]  # (nr, nd, 3)
    u = u.reshape(-1, 3)
    m = (a * p + b * q) / A - (a - b) * u / (2.0 * A)
    V = m[:, None, :] + z[None, :, :] / math.sqrt(A)  # (nu, nV, 3)
    v = V + 0.5 * u[:, None, :]
    vs = V - 0.5 * u[:, None, :]
    wu = (wr[:, None] * r[:, None] ** 2 * dirs.weights[None, :]).reshape(-1)
    w = wu[:, None] * wz_plain[None, :]
    nd = len(dirs.weights)
    return PairNodes(
        v.reshape(-1, 3),
        vs.reshape(-1, 3),
        np.repeat(r, nd),
        np.tile(dirs.directions, (len(r), 1)),
        w.reshape(-1),
        len(wz),
    )


def term_field_value(term: GaussianTerm, v: np.ndarray) -> np.ndarray:
    from .fields import SmoothField

    return SmoothField((term,)).eval(v)


def pair_nodes_radial(term_h: GaussianTerm, term_g: GaussianTerm, radial, directions, n_V: int) -> PairNodes:
    """Like :func:`pair_nodes` but with a prescribed plain radial rule in ``|u|``.

    Used when the integrand carries a non-polynomial factor of ``|u|`` (for
    instance a cutoff) that the Laguerre rule would not resolve.
    """
    a, b = term_h.width, term_g.width
    p, q = np.asarray(term_h.center), np.asarray(term_g.center)
    A = a + b
    z, wz = gauss_hermite_3d(n_V)
    wz_plain = wz * np.exp(np.einsum("ij,ij->i", z, z)) * A**-1.5
    r = radial.r
    u = (r[:, None, None] * directions.directions[None, :, :]).reshape(-1, 3)
    m = (a * p + b * q) / A - (a - b) * u / (2.0 * A)
    V = m[:, None, :] + z[None, :, :] / math.sqrt(A)
    v = V + 0.5 * u[:, None, :]
    vs = V - 0.5 * u[:, None, :]
    wu = (radial.weights[:, None] * r[:, None] ** 2 * directions.weights[None, :]).reshape(-1)
    w = wu[:, None] * wz_plain[None, :]
    nd = len(directions.weights)
    return PairNodes(v.reshape(-1, 3), vs.reshape(-1, 3), np.repeat(r, nd),
                     np.tile(directions.directions, (len(r), 1)), w.reshape(-1), len(wz))
