"""Collision kinematics and the quadrature rules used throughout the package.

Conventions: the surface measure on the unit sphere is ``sin(theta) dtheta dphi``
so that its total mass is ``4 pi``.  All rules are deterministic functions of
their parameters and are returned as immutable objects holding numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_genlaguerre, roots_jacobi, roots_hermite


class DegenerateInputError(ValueError):
    """Raised when a collision is requested with coincident velocities."""


class RuleSpecError(ValueError):
    """Raised for invalid quadrature rule parameters."""


# ---------------------------------------------------------------------------
# Kinematics
# ---------------------------------------------------------------------------


def post_collision(v, v_star, sigma):
    """Post-collisional velocities in the sigma representation.

    Parameters
    ----------
    v, v_star : array_like, shape (..., 3)
        Pre-collisional velocities.
    sigma : array_like, shape (..., 3)
        Unit vectors.

    Returns
    -------
    v_prime, v_star_prime : ndarray
    theta : ndarray
        Deviation angle, ``cos(theta) = (v - v_star)/|v - v_star| . sigma``.
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    u = v - v_star
    r = np.linalg.norm(u, axis=-1)
    if np.any(r == 0):
        raise DegenerateInputError("v and v_star coincide")
    mid = 0.5 * (v + v_star)
    half = 0.5 * r[..., None] * sigma
    cos_t = np.clip(np.einsum("...i,...i->...", u, sigma) / r, -1.0, 1.0)
    return mid + half, mid - half, np.arccos(cos_t)


def _frame_from_axis(k):
    """Right-handed orthonormal frame (h1, h2, k) for unit vectors ``k`` (..., 3)."""
    k = np.asarray(k, dtype=float)
    idx = np.argmin(np.abs(k), axis=-1)
    e = np.zeros(k.shape)
    np.put_along_axis(e, idx[..., None], 1.0, axis=-1)
    h1 = e - np.einsum("...i,...i->...", e, k)[..., None] * k
    h1 /= np.linalg.norm(h1, axis=-1, keepdims=True)
    h2 = np.cross(k, h1)
    return h1, h2


def collision_frame(v, v_star):
    """Orthonormal triple ``(h1, h2, k)`` with ``k = (v - v_star)/|v - v_star|``.

    ``h1`` is obtained by Gram-Schmidt against the coordinate axis on which
    ``k`` has the smallest magnitude; ``h2 = k x h1`` makes the frame
    right-handed.
    """
    u = np.asarray(v, dtype=float) - np.asarray(v_star, dtype=float)
    r = np.linalg.norm(u, axis=-1)
    if np.any(r == 0):
        raise DegenerateInputError("v and v_star coincide")
    k = u / r[..., None]
    h1, h2 = _frame_from_axis(k)
    return h1, h2, k


def sigma_from_angles(frame, theta, phi):
    """Point on the sphere with polar angle ``theta`` about ``frame[2]``."""
    h1, h2, k = frame
    st = np.sin(theta)
    return (st * np.cos(phi))[..., None] * h1 + (st * np.sin(phi))[..., None] * h2 + np.cos(theta)[..., None] * k


def u_plus(u, sigma):
    """``(u + |u| sigma) / 2``."""
    u = np.asarray(u, dtype=float)
    r = np.linalg.norm(u, axis=-1, keepdims=True)
    if np.any(r == 0):
        raise DegenerateInputError("u must be nonzero")
    return 0.5 * (u + r * np.asarray(sigma, dtype=float))


# ---------------------------------------------------------------------------
# One-dimensional building blocks
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def gauss_jacobi_right(n: int, beta: float):
    """Nodes/weights on [0, 1] for the weight ``x**beta``."""
    x, w = roots_jacobi(n, 0.0, beta)
    # map t in [-1, 1] to x = (1 + t)/2; (1 + t)^beta = 2^beta x^beta
    xs = 0.5 * (1.0 + x)
    ws = w / 2.0 ** (beta + 1.0)
    return xs, ws


@lru_cache(maxsize=256)
def gauss_laguerre(n: int, alpha: float):
    """Generalized Gauss-Laguerre rule for ``t**alpha exp(-t)`` on (0, inf)."""
    return roots_genlaguerre(n, alpha)


@lru_cache(maxsize=64)
def gauss_hermite_3d(n: int):
    """Tensor Gauss-Hermite rule for ``exp(-|z|^2)`` in three dimensions."""
    x, w = roots_hermite(n)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    W = np.einsum("i,j,k->ijk", w, w, w)
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
    return nodes, W.ravel()


def _panel_rule(edges, n):
    x, w = gauss_legendre(n)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


# ---------------------------------------------------------------------------
# Sphere rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SphereQuadrature:
    """Product rule in (theta, phi) for ``sin(theta) dtheta dphi``.

    ``theta_weights`` already include the ``sin(theta)`` factor; the full
    weight of node ``(i, j)`` is ``theta_weights[i] * phi_weights[j]``.
    """

    theta: np.ndarray
    theta_weights: np.ndarray
    phi: np.ndarray
    phi_weights: np.ndarray
    theta_min: float
    theta_max: float
    ratio: float
    nodes_per_panel: int

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.theta_weights, self.phi_weights)

    def integrate_zonal(self, values) -> float:
        """Integrate a function of theta only (array over ``theta``)."""
        return 2.0 * math.pi * float(np.dot(self.theta_weights, values))


def build_sphere_rule(
    theta_min: float = 1e-6,
    theta_max: float = 0.5 * math.pi,
    ratio: float = 0.25,
    nodes_per_panel: int = 12,
    n_phi: int = 16,
    tail_exponent: float | None = None,
    breakpoints=(),
    graded: bool = True,
) -> SphereQuadrature:
    """Build a graded product rule on the cap ``0 <= theta <= theta_max``.

    Panels are geometric, ``[theta_max q^{k+1}, theta_max q^k]``, until
    ``theta_min`` is reached.  When ``tail_exponent`` ``p`` is given, the
    contribution of ``[0, theta_min]`` is represented by a single node at
    ``theta_min`` carrying the weight of an integrand behaving like
    ``theta^p`` (including the ``sin(theta)`` factor), i.e.
    ``theta_min / (p + 1)``.

    With ``graded=False`` the interval ``[0, theta_max]`` is covered by
    ``nodes_per_panel`` Gauss-Legendre nodes split at ``breakpoints``.
    """
    if not (0 < theta_max <= math.pi):
        raise RuleSpecError("theta_max must lie in (0, pi]")
    if nodes_per_panel < 1 or n_phi < 1:
        raise RuleSpecError("node counts must be positive")
    if graded:
        if not (0 < theta_min < theta_max) or not (0 < ratio < 1):
            raise RuleSpecError("need 0 < theta_min < theta_max and 0 < ratio < 1")
        if tail_exponent is not None and tail_exponent <= -1:
            raise RuleSpecError("tail exponent must exceed -1")
        edges = [theta_max]
        while edges[-1] * ratio > theta_min:
            edges.append(edges[-1] * ratio)
        edges.append(theta_min)
        edges = sorted(set(edges) | {b for b in breakpoints if theta_min < b < theta_max})
    else:
        edges = sorted({0.0, theta_max} | {b for b in breakpoints if 0 < b < theta_max})
    th, wt = _panel_rule(np.asarray(edges), nodes_per_panel)
    wt = wt * np.sin(th)
    if graded and tail_exponent is not None:
        th = np.concatenate([[theta_min], th])
        wt = np.concatenate([[math.sin(theta_min) * theta_min / (tail_exponent + 1.0)], wt])
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2.0 * math.pi / n_phi)
    return SphereQuadrature(th, wt, phi, wphi, theta_min if graded else 0.0, theta_max, ratio, nodes_per_panel)


@dataclass(frozen=True)
class AngularKernelRule:
    """Rule for ``int b^s(theta) X(sigma) dsigma`` over the cap theta <= pi/2.

    Uses ``w = sin^2(theta/2)`` on ``[0, 1/2]``, in which
    ``b^s dsigma = 2 (1 - s) w^{-1-s} dw dphi``.  The Gauss-Jacobi rule carries
    the weight ``w^{-s}``, so the integrand seen by the rule is ``X / w``;
    for integrands whose azimuthal mean vanishes linearly in ``w`` this is
    smooth and the rule converges exponentially.

    ``weights[p]`` multiplies the azimuthal mean of ``X`` at ``w[p]``.
    """

    s: float
    w: np.ndarray
    theta: np.ndarray
    weights: np.ndarray
    phi: np.ndarray

    @property
    def cos_theta(self):
        return 1.0 - 2.0 * self.w

    @property
    def sin_theta(self):
        return 2.0 * np.sqrt(self.w * (1.0 - self.w))


@lru_cache(maxsize=256)
def build_angular_kernel_rule(s: float, n_w: int = 16, n_phi: int = 16) -> AngularKernelRule:
    if not (0 < s < 1):
        raise RuleSpecError("s must lie in (0, 1)")
    x, wj = gauss_jacobi_right(n_w, -s)
    # int_0^{1/2} w^{-s} F(w) dw = 2^{s-1} int_0^1 x^{-s} F(x/2) dx
    w = 0.5 * x
    base = 2.0 ** (s - 1.0) * wj
    weights = 2.0 * math.pi * 2.0 * (1.0 - s) * base / w
    theta = 2.0 * np.arcsin(np.sqrt(w))
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    return AngularKernelRule(float(s), w, theta, weights, phi)


# ---------------------------------------------------------------------------
# Direction rule on the unit sphere
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DirectionRule:
    """Antipodally symmetric product rule on the full unit sphere (mass 4 pi)."""

    directions: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=64)
def build_direction_rule(n_polar: int = 12, n_azimuth: int = 24) -> DirectionRule:
    if n_azimuth % 2:
        raise RuleSpecError("azimuthal count must be even for antipodal symmetry")
    x, w = gauss_legendre(n_polar)
    az = 2.0 * math.pi * np.arange(n_azimuth) / n_azimuth
    st = np.sqrt(1.0 - x * x)
    d = np.stack(
        [
            np.outer(st, np.cos(az)).ravel(),
            np.outer(st, np.sin(az)).ravel(),
            np.repeat(x, n_azimuth),
        ],
        axis=-1,
    )
    wt = np.repeat(w, n_azimuth) * (2.0 * math.pi / n_azimuth)
    d.setflags(write=False)
    wt.setflags(write=False)
    return DirectionRule(d, wt)


# ---------------------------------------------------------------------------
# Radial rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialQuadrature:
    """Plain rule ``int_0^{R} f(r) dr ~ sum w_i f(r_i)``.

    The first panel ``[0, r_first]`` is Gauss-Jacobi with weight
    ``r^beta``; its weights are divided by ``r_i^beta`` so that the rule is
    exact for ``r^beta`` times a polynomial on that panel.
    """

    r: np.ndarray
    weights: np.ndarray
    beta: float
    r_max: float

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def build_radial_rule(
    gamma: float,
    r_max: float = 8.0,
    r_first: float | None = None,
    n_first: int = 16,
    n_panel: int = 12,
    panel_width: float = 1.0,
    breakpoints=(),
    vanishing_order: float = 2.0,
    r_min: float = 0.0,
) -> RadialQuadrature:
    """Radial rule on ``(r_min, r_max]`` adapted to the weight ``r^(gamma+2)``.

    ``vanishing_order`` is the power with which the remaining integrand
    factor vanishes at the origin (after symmetric direction averaging), so
    the first panel uses the Jacobi exponent ``gamma + 2 + vanishing_order``.
    When ``r_min > 0`` no singular panel is built.
    """
    if r_max <= r_min or r_min < 0:
        raise RuleSpecError("need 0 <= r_min < r_max")
    beta = gamma + 2.0 + vanishing_order
    if r_min == 0.0 and beta <= -1.0:
        raise RuleSpecError(f"radial weight exponent {beta} is not integrable")
    bps = sorted({float(b) for b in breakpoints if r_min < b < r_max})
    nodes, weights = [], []
    start = r_min
    if r_min == 0.0:
        if r_first is None:
            r_first = bps[0] if bps else min(1.0, r_max)
        r_first = min(r_first, r_max)
        x, w = gauss_jacobi_right(n_first, beta)
        nodes.append(r_first * x)
        weights.append(w * r_first / x**beta)
        start = r_first
    edges = [start]
    for b in bps + [r_max]:
        if b <= edges[-1]:
            continue
        k = max(1, int(math.ceil((b - edges[-1]) / panel_width - 1e-12)))
        edges.extend(np.linspace(edges[-1], b, k + 1)[1:].tolist())
    if len(edges) > 1:
        rr, ww = _panel_rule(np.asarray(edges), n_panel)
        nodes.append(rr)
        weights.append(ww)
    return RadialQuadrature(np.concatenate(nodes), np.concatenate(weights), beta, r_max)
