"""Pointwise and weak-form evaluation of the scaled non-cutoff Boltzmann operator.

Pointwise evaluation integrates ``g(v'_*) h(v') - g(v_*) h(v)`` over the
relative velocity ``u = v - v_*`` in spherical shells centred at ``v`` and over
``sigma`` in a frame aligned with ``u``.  Two symmetries of the quadrature make
every singular integrand regular without any subtraction:

* the azimuthal trapezoid rule about ``u`` integrates the term linear in the
  transverse part of ``sigma`` to exactly zero, leaving an integrand that
  vanishes like ``sin^2(theta/2)``; the angular rule in
  ``w = sin^2(theta/2)`` then carries the singular weight ``w^-s`` exactly;
* the direction rule for ``u/|u|`` is antipodally symmetric, so the part of the
  integrand odd in ``u`` cancels and the radial integrand vanishes like
  ``|u|^2``; the first radial panel carries ``|u|^(gamma+4)`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .fields import Polynomial, SmoothField
from .geometry import (
    _frame_from_axis,
    build_angular_kernel_rule,
    build_direction_rule,
    RadialQuadrature,
    build_radial_rule,
    gauss_hermite_3d,
)
from .kernel import (
    CUTOFF_HIGH,
    CUTOFF_LOW,
    KernelParams,
    ParameterError,
    angular_b,
    cancellation_constant,
    cancellation_kernel_S,
    smooth_cutoff,
)
from .pairs import PairRuleSpec, pair_nodes, pair_nodes_radial

MODES = ("compensated", "split", "naive")
_RADIAL_CHUNK = 8


class ToleranceError(RuntimeError):
    """Two refinement levels disagree by more than the requested tolerance."""


@dataclass(frozen=True)
class EvalConfig:
    """Quadrature settings for pointwise and weak evaluation.

    Parameters
    ----------
    n_first, n_panel, panel_width, r_max :
        Radial rule: Gauss-Jacobi nodes on the first panel, Gauss-Legendre
        nodes per later panel, panel width, and the Gaussian extent in units
        of ``1/sqrt(2 a)`` for a term of width ``a``.
    n_polar, n_azimuth :
        Direction rule for ``u / |u|``.
    n_w, n_phi :
        Angular kernel rule (in ``sin^2(theta/2)``) and azimuthal nodes.
    tol :
        Target absolute tolerance used by :func:`estimate_Q`.
    mode :
        ``"compensated"`` (default), ``"split"`` (gain/loss split with the
        cancellation constant, needs ``gamma > -3``) or ``"naive"``
        (sphere grid not aligned with the collision axis; ``s < 1/2`` only).
    """

    n_first: int = 10
    n_panel: int = 8
    panel_width: float = 1.0
    r_max: float = 8.0
    n_polar: int = 10
    n_azimuth: int = 20
    n_w: int = 8
    n_phi: int = 10
    tol: float = 1e-6
    mode: str = "compensated"
    cutoff_shape: str = "exp"
    strict: bool = False
    pair: PairRuleSpec = field(default_factory=PairRuleSpec)

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.n_azimuth % 2 or self.n_phi % 2:
            raise ValueError("azimuthal node counts must be even")

    def refined(self) -> "EvalConfig":
        def up(n, k=1.5):
            return int(math.ceil(n * k))

        def even(n):
            return n + (n % 2)

        return replace(
            self,
            n_first=up(self.n_first),
            n_panel=up(self.n_panel),
            n_polar=up(self.n_polar),
            n_azimuth=even(up(self.n_azimuth)),
            n_w=up(self.n_w),
            n_phi=even(up(self.n_phi)),
            pair=self.pair.refined(),
        )


# ---------------------------------------------------------------------------
# Pointwise evaluation
# ---------------------------------------------------------------------------


def _extent(g: SmoothField, v: np.ndarray, r_max: float) -> float:
    ext = 0.0
    for t in g.terms:
        ext = max(ext, float(np.linalg.norm(v - np.asarray(t.center))) + r_max / math.sqrt(2.0 * t.width))
    return ext


def _direction_rule(g: SmoothField, v: np.ndarray, cfg: EvalConfig):
    """Direction rule for shells centred at ``v``, refined for distant sources.

    A term of width ``a`` at distance ``d`` subtends an angle of order
    ``1 / (d sqrt(2a))``, so the polar count grows with ``d sqrt(2a)`` beyond 2.
    """
    reach = max(float(np.linalg.norm(v - np.asarray(t.center))) * math.sqrt(2.0 * t.width) for t in g.terms)
    factor = max(1.0, 0.5 * reach)
    n_polar = int(math.ceil(cfg.n_polar * factor))
    n_azimuth = int(math.ceil(cfg.n_azimuth * factor))
    return build_direction_rule(n_polar, n_azimuth + (n_azimuth % 2))


def _radial_rule(gamma, eta, extent, cfg, vanishing_order=2.0):
    bps = (CUTOFF_LOW * eta, CUTOFF_HIGH * eta)
    return build_radial_rule(
        gamma,
        r_max=max(extent, 2.0 * eta),
        r_first=CUTOFF_LOW * eta,
        n_first=cfg.n_first,
        n_panel=cfg.n_panel,
        panel_width=cfg.panel_width,
        breakpoints=bps,
        vanishing_order=vanishing_order,
    )


def _sigma_template(dirs, ang):
    """sigma for every (direction, w-node, phi-node); shape (nd, nw, nphi, 3)."""
    k = dirs.directions
    h1, h2 = _frame_from_axis(k)
    st = ang.sin_theta[None, :, None, None]
    ct = ang.cos_theta[None, :, None, None]
    cp = np.cos(ang.phi)[None, None, :, None]
    sp = np.sin(ang.phi)[None, None, :, None]
    return st * (cp * h1[:, None, None, :] + sp * h2[:, None, None, :]) + ct * k[:, None, None, :]


def _cut_factor(params, r, part, shape):
    if part == "full":
        return np.ones_like(r)
    psi = smooth_cutoff(r / params.eta, shape)
    if part == "near":
        return psi
    if part == "far":
        return 1.0 - psi
    raise ValueError(f"unknown part {part!r}")


def _check_params(params: KernelParams, cfg: EvalConfig):
    params.require_operator_grade()
    if cfg.mode == "naive" and params.s >= 0.5:
        raise ParameterError("naive mode is only admissible for s < 1/2")
    if cfg.mode == "split" and params.gamma <= -3.0:
        raise ParameterError("split mode needs gamma > -3")


def _pointwise(params, g, h, v, cfg, part):
    v = np.asarray(v, dtype=float)
    s, gamma = params.s, params.gamma
    rule = _radial_rule(gamma, params.eta, _extent(g, v, cfg.r_max), cfg)
    dirs = _direction_rule(g, v, cfg)
    k = dirs.directions
    hv = float(h.eval(v))
    cut = _cut_factor(params, rule.r, part, cfg.cutoff_shape)
    if cfg.mode == "naive":
        return _pointwise_naive(params, g, h, v, cfg, rule, dirs, hv, cut)
    ang = build_angular_kernel_rule(s, cfg.n_w, cfg.n_phi)
    sig = _sigma_template(dirs, ang)
    minus = sig - k[:, None, None, :]
    plus = sig + k[:, None, None, :]
    total = 0.0
    for ri, wi, ci in zip(rule.r, rule.weights, cut):
        if ci == 0.0:
            continue
        half = 0.5 * ri
        gs = g.eval(v - ri * k)
        gsp = g.eval(v - half * plus)
        hp = h.eval(v + half * minus)
        if cfg.mode == "split":
            T = gsp * (hp - hv)
        else:
            T = gsp * hp - (gs * hv)[:, None, None]
        F = np.dot(T.mean(axis=-1) @ ang.weights, dirs.weights)
        total += wi * ci * ri ** (gamma + 2.0) * F
    if cfg.mode == "split":
        total += hv * _split_convolution(params, g, v, cfg)
    return total


def _split_convolution(params, g, v, cfg):
    """``c_{s,gamma} int |u|^gamma g(v - u) du`` for the loss/gain split."""
    c = cancellation_constant(params.s, params.gamma)
    rule = build_radial_rule(params.gamma, r_max=_extent(g, v, cfg.r_max), r_first=1.0, n_first=cfg.n_first,
                             n_panel=cfg.n_panel, panel_width=cfg.panel_width, vanishing_order=0.0)
    dirs = _direction_rule(g, v, cfg)
    u = rule.r[:, None, None] * dirs.directions[None, :, :]
    vals = g.eval(v - u) @ dirs.weights
    return c * float(np.dot(rule.weights * rule.r ** (params.gamma + 2.0), vals))


def _pointwise_naive(params, g, h, v, cfg, rule, dirs, hv, cut):
    # sigma on a fixed grid about the z axis; nodes never align with u
    sig_rule = build_direction_rule(2 * cfg.n_polar, 4 * cfg.n_azimuth)
    sig = sig_rule.directions
    k = dirs.directions
    cos_t = np.clip(k @ sig.T, -1.0, 1.0)  # (nd, nsig)
    theta = np.arccos(cos_t)
    keep = (theta <= 0.5 * math.pi) & (theta > 0)
    b = np.zeros_like(theta)
    b[keep] = angular_b(params.s, theta[keep])
    wb = b * sig_rule.weights[None, :]
    total = 0.0
    for ri, wi, ci in zip(rule.r, rule.weights, cut):
        if ci == 0.0:
            continue
        half = 0.5 * ri
        gs = g.eval(v - ri * k)
        vp = v + half * (sig[None, :, :] - k[:, None, :])
        vsp = v - half * (sig[None, :, :] + k[:, None, :])
        T = g.eval(vsp) * h.eval(vp) - (gs * hv)[:, None]
        F = np.dot((T * wb).sum(axis=1), dirs.weights)
        total += wi * ci * ri ** (params.gamma + 2.0) * F
    return total


def eval_Q(params: KernelParams, g: SmoothField, h: SmoothField, v, cfg: EvalConfig | None = None) -> float:
    """Pointwise value ``Q(g, h)(v)``.

    With ``cfg.strict`` the value is compared against a refined evaluation and
    :class:`ToleranceError` is raised when they differ by more than
    ``cfg.tol``.
    """
    cfg = cfg or EvalConfig()
    _check_params(params, cfg)
    if cfg.strict:
        return estimate_Q(params, g, h, v, cfg)[0]
    return float(_pointwise(params, g, h, v, cfg, "full"))


def eval_Q_near(params, g, h, v, cfg: EvalConfig | None = None) -> float:
    """Contribution of the kernel part supported in ``|v - v_*| <= 4 eta / 3``."""
    cfg = cfg or EvalConfig()
    _check_params(params, cfg)
    if cfg.mode == "split":
        raise ParameterError("near/far parts are evaluated in compensated mode")
    return float(_pointwise(params, g, h, v, cfg, "near"))


def eval_Q_far(params, g, h, v, cfg: EvalConfig | None = None) -> float:
    """Contribution of the kernel part supported in ``|v - v_*| >= 3 eta / 4``."""
    cfg = cfg or EvalConfig()
    _check_params(params, cfg)
    if cfg.mode == "split":
        raise ParameterError("near/far parts are evaluated in compensated mode")
    return float(_pointwise(params, g, h, v, cfg, "far"))


def estimate_Q(params, g, h, v, cfg: EvalConfig | None = None, part: str = "full"):
    """Value and error estimate ``|Q_cfg - Q_refined|``.

    Returns
    -------
    value : float
        The value at the refined level.
    error : float
    """
    cfg = cfg or EvalConfig()
    _check_params(params, cfg)
    coarse = float(_pointwise(params, g, h, v, cfg, part))
    fine = float(_pointwise(params, g, h, v, cfg.refined(), part))
    err = abs(fine - coarse)
    if cfg.strict and err > cfg.tol:
        raise ToleranceError(f"refinement levels differ by {err:.3e} > tol {cfg.tol:.1e}")
    return fine, err


# ---------------------------------------------------------------------------
# Weak form
# ---------------------------------------------------------------------------


def _as_test_function(phi):
    if isinstance(phi, Polynomial):
        return phi, phi.degree
    if isinstance(phi, SmoothField):
        return phi, None
    if isinstance(phi, dict):
        p = Polynomial.from_dict(phi)
        return p, p.degree
    raise TypeError("test function must be a Polynomial or a SmoothField")


def _angular_for_weak(s, degree, cfg):
    if degree is not None:
        # the azimuthal mean of a degree-d polynomial in sigma is a
        # polynomial of degree <= d in w; d+1 azimuthal nodes are exact
        n_w = max(2, degree // 2 + 2)
        n_phi = max(2, degree + 2 + (degree % 2))
        return build_angular_kernel_rule(s, n_w, n_phi)
    return build_angular_kernel_rule(s, cfg.n_w, cfg.n_phi)


def sigma_average(phi, v, u_hat, r, ang):
    """``sum_p W_p mean_phi [phi(v') - phi(v)]`` for nodes ``v`` with axes ``u_hat``.

    ``v`` has shape (n, 3); ``u_hat`` and ``r`` have one entry per node.
    Returns the signed sum and the sum of absolute values.
    """
    h1, h2 = _frame_from_axis(u_hat)
    base = phi(v)
    acc = np.zeros(len(v))
    acc_abs = np.zeros(len(v))
    nphi = len(ang.phi)
    for p in range(len(ang.w)):
        st, ct = ang.sin_theta[p], ang.cos_theta[p]
        sub = np.zeros(len(v))
        sub_abs = np.zeros(len(v))
        for ph in ang.phi:
            sig = st * (math.cos(ph) * h1 + math.sin(ph) * h2) + ct * u_hat
            d = phi(v + 0.5 * r[:, None] * (sig - u_hat)) - base
            sub += d
            sub_abs += np.abs(d)
        acc += ang.weights[p] * sub / nphi
        acc_abs += ang.weights[p] * sub_abs / nphi
    return acc, acc_abs


def weak_Q(params: KernelParams, g: SmoothField, h: SmoothField, phi, cfg: EvalConfig | None = None,
           part: str = "full", return_scale: bool = False):
    """``<Q(g, h), phi> = int B g_* h (phi' - phi) dsigma dv_* dv``.

    Exact zero is returned for a constant test function.  For polynomial
    ``phi`` the sigma-rule is chosen exact for its degree; the remaining
    quadrature is the Gaussian pair rule of :mod:`boltzlandau.pairs`.

    With ``return_scale`` the pair ``(value, scale)`` is returned, where
    ``scale`` integrates the absolute value of the integrand.
    """
    cfg = cfg or EvalConfig()
    params.require_operator_grade()
    phi, degree = _as_test_function(phi)
    if degree == 0:
        return (0.0, 0.0) if return_scale else 0.0
    ang = _angular_for_weak(params.s, degree, cfg)
    total, scale = 0.0, 0.0
    for th in h.terms:
        for tg in g.terms:
            nodes = pair_nodes(th, tg, params.gamma, cfg.pair)
            nV = nodes.n_V
            rr = np.repeat(nodes.r, nV)
            uh = np.repeat(nodes.u_hat, nV, axis=0)
            K, K_abs = sigma_average(phi, nodes.v, uh, rr, ang)
            gh = SmoothField((tg,)).eval(nodes.v_star) * SmoothField((th,)).eval(nodes.v)
            base = nodes.weights * gh * rr**params.gamma * _cut_factor(params, rr, part, cfg.cutoff_shape)
            total += float(np.dot(base, K))
            scale += float(np.dot(np.abs(base), K_abs))
    return (total, scale) if return_scale else total


# ---------------------------------------------------------------------------
# Cancellation identity: two independent computations
# ---------------------------------------------------------------------------


class _Correlation:
    """``C(z) = int g(y) h(y + z) dy`` as polynomial x Gaussian per term pair."""

    def __init__(self, g: SmoothField, h: SmoothField, n_gh: int = 8):
        self.pieces = []
        for tg in g.terms:
            for th in h.terms:
                deg = tg.poly.degree + th.poly.degree
                a, b = th.width, tg.width
                p, q = np.asarray(th.center), np.asarray(tg.center)
                A = a + b
                ae = a * b / A
                d = p - q
                exps = [e for dd in range(deg + 1) for e in _exponents_of_degree(dd)]
                # collocation points: a scaled lattice of size >= number of monomials
                rng = np.random.default_rng(12345)
                zs = d + rng.standard_normal((3 * len(exps) + 10, 3)) * 0.7 / math.sqrt(ae)
                vals = self._direct(tg, th, zs, n_gh)
                env = np.exp(-ae * np.sum((zs - d) ** 2, axis=-1))
                M = np.stack([np.prod(zs ** np.asarray(e), axis=-1) for e in exps], axis=-1)
                coef, *_ = np.linalg.lstsq(M, vals / env, rcond=None)
                self.pieces.append((exps, coef, ae, d))

    @staticmethod
    def _direct(tg, th, z, n_gh):
        a, b = th.width, tg.width
        p, q = np.asarray(th.center), np.asarray(tg.center)
        A = a + b
        xi, wx = gauss_hermite_3d(n_gh)
        wplain = wx * np.exp(np.einsum("ij,ij->i", xi, xi)) * A**-1.5
        y0 = (b * q + a * (p - z)) / A
        y = y0[:, None, :] + xi[None, :, :] / math.sqrt(A)
        vals = SmoothField((tg,)).eval(y) * SmoothField((th,)).eval(y + z[:, None, :])
        return vals @ wplain

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape[:-1])
        for exps, coef, ae, d in self.pieces:
            poly = np.zeros(z.shape[:-1])
            for e, c in zip(exps, coef):
                poly += c * z[..., 0] ** e[0] * z[..., 1] ** e[1] * z[..., 2] ** e[2]
            out += poly * np.exp(-ae * np.sum((z - d) ** 2, axis=-1))
        return out


def _exponents_of_degree(d):
    return [(i, j, d - i - j) for i in range(d, -1, -1) for j in range(d - i, -1, -1)]


def _correlation_extent(g, h, r_max):
    ext = 0.0
    for tg in g.terms:
        for th in h.terms:
            ae = tg.width * th.width / (tg.width + th.width)
            d = np.asarray(th.center) - np.asarray(tg.center)
            ext = max(ext, float(np.linalg.norm(d)) + r_max / math.sqrt(2.0 * ae))
    return ext


def cancellation_direct(params: KernelParams, g: SmoothField, h: SmoothField, cfg: EvalConfig | None = None) -> float:
    """``int B_far g_* (h' - h) dsigma dv_* dv`` by direct quadrature.

    With ``C(z) = int g(y) h(y + z) dy`` the integral equals
    ``int du |u|^gamma psi^eta(|u|) int b [C(u_plus) - C(u)] dsigma`` where
    ``u_plus = (u + |u| sigma)/2``.
    """
    cfg = cfg or EvalConfig()
    C = _Correlation(g, h)
    eta = params.eta
    ext = _correlation_extent(g, h, cfg.r_max)
    rule = build_radial_rule(params.gamma, r_max=ext, r_min=CUTOFF_LOW * eta, n_panel=cfg.n_panel,
                             panel_width=cfg.panel_width, breakpoints=(CUTOFF_HIGH * eta,))
    dirs = build_direction_rule(cfg.n_polar, cfg.n_azimuth)
    ang = build_angular_kernel_rule(params.s, cfg.n_w, cfg.n_phi)
    sig = _sigma_template(dirs, ang)
    k = dirs.directions
    cut = 1.0 - smooth_cutoff(rule.r / eta, cfg.cutoff_shape)
    total = 0.0
    for ri, wi, ci in zip(rule.r, rule.weights, cut):
        if ci == 0.0:
            continue
        u = ri * k
        up = 0.5 * (u[:, None, None, :] + ri * sig)
        T = C(up) - C(u)[:, None, None]
        F = np.dot(T.mean(axis=-1) @ ang.weights, dirs.weights)
        total += wi * ci * ri ** (params.gamma + 2.0) * F
    return float(total)


def cancellation_convolution(params: KernelParams, g: SmoothField, h: SmoothField,
                             cfg: EvalConfig | None = None) -> float:
    """``int int S(|v - v_*|) g(v_*) h(v) dv_* dv`` with the far-part kernel ``S``."""
    cfg = cfg or EvalConfig()
    eta = params.eta
    lo = CUTOFF_LOW * eta / math.sqrt(2.0)
    total = 0.0
    for th in h.terms:
        for tg in g.terms:
            ae = th.width * tg.width / (th.width + tg.width)
            d = float(np.linalg.norm(np.asarray(th.center) - np.asarray(tg.center)))
            ext = d + cfg.r_max / math.sqrt(2.0 * ae)
            # S varies on [lo, 4 eta / 3]; resolve the cutoff transition with narrow panels
            band = np.linspace(lo, CUTOFF_HIGH * eta, 9)
            rule = build_radial_rule(params.gamma, r_max=max(ext, 2.0), r_min=lo, n_panel=cfg.n_panel,
                                     panel_width=cfg.panel_width,
                                     breakpoints=tuple(band) + (CUTOFF_LOW * eta, CUTOFF_HIGH * eta / math.sqrt(2.0)))
            dirs = build_direction_rule(cfg.n_polar, cfg.n_azimuth)
            S = cancellation_kernel_S(params, rule.r, shape=cfg.cutoff_shape)
            keep = S != 0.0
            r_kept, w_kept, S = rule.r[keep], rule.weights[keep], S[keep]
            for lo_i in range(0, len(r_kept), _RADIAL_CHUNK):
                sl = slice(lo_i, lo_i + _RADIAL_CHUNK)
                sub = RadialQuadrature(r_kept[sl], w_kept[sl], rule.beta, rule.r_max)
                nodes = pair_nodes_radial(th, tg, sub, dirs, cfg.pair.n_V)
                Sn = np.repeat(np.repeat(S[sl], len(dirs.weights)), nodes.n_V)
                gh = SmoothField((tg,)).eval(nodes.v_star) * SmoothField((th,)).eval(nodes.v)
                total += float(np.dot(nodes.weights * Sn, gh))
    return total
