"""The scaled non-cutoff collision kernel and its closed-form angular integrals.

The kernel is ``B(r, theta) = b^s(theta) r^gamma`` with angular part

    b^s(theta) = (1 - s) sin(theta/2)^(-2-2s)   for 0 < theta <= pi/2,

and zero on ``(pi/2, pi]``.  A smooth cutoff ``psi`` splits it into a part
supported near the diagonal ``r <= 4 eta/3`` and a part supported away from it
``r >= 3 eta/4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .geometry import build_sphere_rule

CUTOFF_LOW = 0.75
CUTOFF_HIGH = 4.0 / 3.0


class ParameterError(ValueError):
    """Kernel parameters outside their admissible range."""


class OperatorGradeError(ParameterError):
    """Parameters valid for the kernel but not integrable for the operator."""


class SingularInputError(ValueError):
    """Evaluation requested at a singular point of the kernel."""


@dataclass(frozen=True)
class KernelParams:
    """Physical triple ``(s, gamma, eta)``.

    Parameters
    ----------
    s : float
        Angular singularity exponent, ``0 < s < 1``.
    gamma : float
        Kinetic exponent, ``-5 < gamma <= 0``.
    eta : float
        Split radius for the near/far decomposition, ``0 < eta <= 1``.
    """

    s: float
    gamma: float
    eta: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.s < 1.0):
            raise ParameterError(f"s must lie in (0, 1), got {self.s}")
        if not (-5.0 < self.gamma <= 0.0):
            raise ParameterError(f"gamma must lie in (-5, 0], got {self.gamma}")
        if not (0.0 < self.eta <= 1.0):
            raise ParameterError(f"eta must lie in (0, 1], got {self.eta}")

    @classmethod
    def operator_grade(cls, s: float, gamma: float, eta: float = 1.0) -> "KernelParams":
        """Constructor that also enforces ``gamma + 2 s + 3 > 0``."""
        p = cls(s, gamma, eta)
        p.require_operator_grade()
        return p

    def require_operator_grade(self) -> None:
        if not (self.gamma + 2.0 * self.s + 3.0 > 0.0):
            raise OperatorGradeError(
                f"gamma + 2 s + 3 must be positive (s={self.s}, gamma={self.gamma})"
            )

    def with_s(self, s: float) -> "KernelParams":
        return KernelParams(s, self.gamma, self.eta)


# ---------------------------------------------------------------------------
# Smooth cutoff
# ---------------------------------------------------------------------------


def _bump_piece(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_cutoff(r, shape: str = "exp"):
    """Cutoff equal to 1 on ``[0, 3/4]`` and 0 on ``[4/3, inf)``.

    ``shape="exp"`` is the infinitely differentiable blend
    ``f(1-t) / (f(1-t) + f(t))`` with ``f(t) = exp(-1/t)``;
    ``shape="quintic"`` is the C^2 smoothstep used to test insensitivity to
    the choice.  Both have ``|psi'| <= 4``.
    """
    r = np.asarray(r, dtype=float)
    t = np.clip((r - CUTOFF_LOW) / (CUTOFF_HIGH - CUTOFF_LOW), 0.0, 1.0)
    if shape == "exp":
        a = _bump_piece(1.0 - t)
        b = _bump_piece(t)
        out = a / (a + b)
    elif shape == "quintic":
        out = 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t)
    else:
        raise ValueError(f"unknown cutoff shape {shape!r}")
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Kernel evaluation
# ---------------------------------------------------------------------------


def _check_s(s):
    if not (0.0 < s < 1.0):
        raise ParameterError(f"s must lie in (0, 1), got {s}")


def angular_b(s: float, theta):
    """Angular factor ``(1 - s) sin(theta/2)^(-2-2s)`` restricted to theta <= pi/2."""
    _check_s(s)
    theta = np.asarray(theta, dtype=float)
    if np.any(theta == 0.0):
        raise SingularInputError("angular factor is singular at theta = 0")
    val = (1.0 - s) * np.sin(0.5 * theta) ** (-2.0 - 2.0 * s)
    out = np.where(theta <= 0.5 * math.pi, val, 0.0)
    return out if out.ndim else float(out)


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise SingularInputError("relative speed must be positive")
    return r


def kernel_B(params: KernelParams, r, theta):
    r = _check_r(r)
    return angular_b(params.s, theta) * r**params.gamma


def kernel_near(params: KernelParams, r, theta):
    r = _check_r(r)
    return smooth_cutoff(r / params.eta) * kernel_B(params, r, theta)


def kernel_far(params: KernelParams, r, theta):
    r = _check_r(r)
    return (1.0 - smooth_cutoff(r / params.eta)) * kernel_B(params, r, theta)


def scaling_factor(s: float) -> float:
    """The factor ``2^(s-1)`` relating the grazing limit to the Landau operator."""
    return 2.0 ** (s - 1.0)


# ---------------------------------------------------------------------------
# Closed-form angular integrals and their quadrature companions
# ---------------------------------------------------------------------------


def momentum_transfer_moment(s: float) -> float:
    """``int b^s sin^2(theta/2) dsigma = 4 pi 2^(s-1)``; equals ``4 pi`` at s = 1."""
    if not (0.0 < s <= 1.0):
        raise ParameterError(f"s must lie in (0, 1], got {s}")
    return 4.0 * math.pi * 2.0 ** (s - 1.0)


def sin4_moment(s: float) -> float:
    """``int b^s sin^4(theta/2) dsigma = 8 pi (1-s) 2^(s-2) / (4 - 2s)``."""
    _check_s(s)
    return 8.0 * math.pi * (1.0 - s) * 2.0 ** (s - 2.0) / (4.0 - 2.0 * s)


def _graded_rule(s, tail_exponent, **kw):
    opts = dict(theta_min=1e-7, ratio=0.25, nodes_per_panel=20, n_phi=1)
    opts.update(kw)
    return build_sphere_rule(tail_exponent=tail_exponent, **opts)


def momentum_transfer_quadrature(s: float, **rule_opts) -> float:
    """Graded theta-quadrature of ``int b^s sin^2(theta/2) dsigma``."""
    rule = _graded_rule(s, 1.0 - 2.0 * s, **rule_opts)
    vals = angular_b(s, rule.theta) * np.sin(0.5 * rule.theta) ** 2
    return rule.integrate_zonal(vals)


def sin4_quadrature(s: float, **rule_opts) -> float:
    rule = _graded_rule(s, 3.0 - 2.0 * s, **rule_opts)
    vals = angular_b(s, rule.theta) * np.sin(0.5 * rule.theta) ** 4
    return rule.integrate_zonal(vals)


def angular_symbol_A(s: float, xi_norm: float) -> float:
    """``int b^s min(|xi|^2 sin^2(theta/2), 1) dsigma`` in closed form."""
    _check_s(s)
    if xi_norm < 0:
        raise ParameterError("|xi| must be nonnegative")
    if xi_norm <= math.sqrt(2.0):
        return 4.0 * math.pi * 2.0 ** (s - 1.0) * xi_norm**2
    x2s = xi_norm ** (2.0 * s)
    return 4.0 * math.pi * (x2s + (1.0 - s) / s * (x2s - 2.0**s))


def angular_symbol_A_quadrature(s: float, xi_norm: float, **rule_opts) -> float:
    """Quadrature companion of :func:`angular_symbol_A`.

    The kink of ``min(., 1)`` at ``sin(theta/2) = 1/|xi|`` is a panel break.
    """
    _check_s(s)
    if xi_norm == 0:
        return 0.0
    bps = ()
    if xi_norm > math.sqrt(2.0):
        bps = (2.0 * math.asin(1.0 / xi_norm),)
    rule = _graded_rule(s, 1.0 - 2.0 * s, breakpoints=bps, **rule_opts)
    vals = angular_b(s, rule.theta) * np.minimum(xi_norm**2 * np.sin(0.5 * rule.theta) ** 2, 1.0)
    return rule.integrate_zonal(vals)


def change_of_var_psi(a: float, theta):
    """Stretch factor ``(cos^2(theta/2) + (1-a)^2 sin^2(theta/2))^(-1/2)``."""
    if not (0.0 <= a <= 2.0):
        raise ParameterError("a must lie in [0, 2]")
    theta = np.asarray(theta, dtype=float)
    c2 = np.cos(0.5 * theta) ** 2
    s2 = np.sin(0.5 * theta) ** 2
    out = (c2 + (1.0 - a) ** 2 * s2) ** -0.5
    return out if out.ndim else float(out)


def change_of_var_alpha(a: float, theta):
    """Jacobian factor ``(1-a/2)^2 ((1-a/2) + (a/2) cos(theta))``."""
    if not (0.0 <= a <= 2.0):
        raise ParameterError("a must lie in [0, 2]")
    theta = np.asarray(theta, dtype=float)
    h = 1.0 - 0.5 * a
    out = h * h * (h + 0.5 * a * np.cos(theta))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Cancellation kernel
# ---------------------------------------------------------------------------


def _far_cutoff(x, shape="exp"):
    return 1.0 - smooth_cutoff(x, shape)


BAND_THETA_MIN = 2e-4


def _cos_power_minus_one(theta, p):
    """``cos(theta/2)**p - 1`` without cancellation near ``theta = 0``."""
    return np.expm1(0.5 * p * np.log1p(-np.sin(0.5 * theta) ** 2))


def cancellation_kernel_S(params: KernelParams, r, n_panel: int = 16, theta_min: float = 1e-7,
                          shape: str = "exp"):
    """Convolution kernel for the far part of the collision kernel.

    ``S(r) = int r^gamma b^s [cos^(-gamma-3)(theta/2) psi^eta(r/cos(theta/2)) - psi^eta(r)] dsigma``
    with ``psi^eta(x) = 1 - psi(x/eta)``.  Vanishes identically for
    ``r < 3 eta / (4 sqrt 2)``.

    The integrand vanishes like ``theta^2`` at the pole wherever
    ``psi^eta`` is locally constant; the theta-quadrature is graded toward 0
    and split where ``r / cos(theta/2)`` crosses the cutoff transition.
    """
    r_arr = _check_r(r)
    scalar = r_arr.ndim == 0
    r_arr = np.atleast_1d(r_arr)
    s, g, eta = params.s, params.gamma, params.eta
    out = np.zeros(r_arr.shape)
    lo, hi = CUTOFF_LOW * eta, CUTOFF_HIGH * eta
    for i, rv in enumerate(r_arr):
        if rv * math.sqrt(2.0) < lo:
            continue
        bps = []
        for edge in (lo, hi):
            c = rv / edge
            if c < 1.0 and c > math.sqrt(0.5):
                bps.append(2.0 * math.acos(c))
        # inside the transition psi(r / cos) - psi(r) cancels to rounding for tiny theta;
        # start the panels higher and let the power-law tail node cover the rest
        t_min = max(theta_min, BAND_THETA_MIN) if lo < rv < hi else theta_min
        rule = build_sphere_rule(theta_min=t_min, ratio=0.25, nodes_per_panel=n_panel, n_phi=1,
                                 tail_exponent=1.0 - 2.0 * s, breakpoints=tuple(bps))
        th = rule.theta
        ch = np.cos(0.5 * th)
        outer = _far_cutoff(rv / ch / eta, shape)
        vals = angular_b(s, th) * (_cos_power_minus_one(th, -g - 3.0) * outer
                                   + (outer - _far_cutoff(rv / eta, shape)))
        out[i] = rv**g * rule.integrate_zonal(vals)
    return float(out[0]) if scalar else out


def cancellation_constant(s: float, gamma: float, n_panel: int = 20) -> float:
    """``int b^s (cos^(-gamma-3)(theta/2) - 1) dsigma``: the full-kernel S is this times r^gamma."""
    rule = build_sphere_rule(theta_min=1e-7, ratio=0.25, nodes_per_panel=n_panel, n_phi=1,
                             tail_exponent=1.0 - 2.0 * s)
    th = rule.theta
    vals = angular_b(s, th) * _cos_power_minus_one(th, -gamma - 3.0)
    return rule.integrate_zonal(vals)


def scipy_zonal_integral(func, a=0.0, b=0.5 * math.pi) -> float:
    """Independent adaptive oracle for ``2 pi int_a^b func(theta) sin(theta) dtheta``."""
    val, _ = integrate.quad(lambda t: func(t) * math.sin(t), a, b, limit=400, epsabs=0.0, epsrel=1e-13)
    return 2.0 * math.pi * val


def _interpolated_pair(x, sigma, kappa, iota):
    """``(v(kappa), v_*(iota))`` for ``x = (v, v_*)``; complex-step safe."""
    v, vs = x[:3], x[3:]
    u = v - vs
    r = np.sqrt(np.sum(u * u))
    vp = 0.5 * (v + vs) + 0.5 * r * sigma
    vsp = 0.5 * (v + vs) - 0.5 * r * sigma
    return np.concatenate([kappa * vp + (1.0 - kappa) * v, iota * vsp + (1.0 - iota) * vs])


def change_of_var_geometric(kappa: float, iota: float, theta: float, v=(0.3, -0.2, 0.5),
                            v_star=(-0.4, 0.1, -0.6), azimuth: float = 0.7):
    """Geometric oracle for ``psi_a`` and ``alpha_a`` with ``a = kappa + iota``.

    Builds ``sigma`` at deviation angle ``theta`` from ``v - v_*`` and returns
    ``|v - v_*| / |v(kappa) - v_*(iota)|`` together with the Jacobian
    determinant of ``(v, v_*) -> (v(kappa), v_*(iota))`` at fixed ``sigma``,
    differentiated by complex step.
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    u = v - v_star
    k = u / np.linalg.norm(u)
    e = np.eye(3)[int(np.argmin(np.abs(k)))]
    h1 = e - (e @ k) * k
    h1 /= np.linalg.norm(h1)
    h2 = np.cross(k, h1)
    sigma = math.cos(theta) * k + math.sin(theta) * (math.cos(azimuth) * h1 + math.sin(azimuth) * h2)
    x0 = np.concatenate([v, v_star])
    y = _interpolated_pair(x0, sigma, kappa, iota)
    psi = float(np.linalg.norm(u) / np.linalg.norm(y[:3] - y[3:]))
    step = 1e-30
    jac = np.empty((6, 6))
    for j in range(6):
        xc = x0.astype(complex)
        xc[j] += 1j * step
        jac[:, j] = np.imag(_interpolated_pair(xc, sigma, kappa, iota)) / step
    return psi, float(np.linalg.det(jac))
