"""Landau collision operator with matrix ``a(z) = pi |z|^(gamma+2) (I - z z^T / |z|^2)``.

The primary pointwise path is the non-divergence form

    Q_L(g, h) = (a * g) : hess h - (a * : hess g) h,

whose convolutions are integrated in spherical shells centred at ``v``.  A
divergence-form evaluation by central differences of the flux is kept as an
independent low-accuracy check.
"""

from __future__ import annotations

import math

import numpy as np

from .boltzmann import EvalConfig, ToleranceError, _direction_rule, _extent
from .fields import Polynomial, SmoothField
from .geometry import build_radial_rule
from .kernel import ParameterError, SingularInputError
from .pairs import pair_nodes

LANDAU_CONSTANT = math.pi


def _check_gamma(gamma):
    if not (-5.0 < gamma <= 0.0):
        raise ParameterError(f"gamma must lie in (-5, 0], got {gamma}")


def landau_matrix(gamma: float, z) -> np.ndarray:
    """Collision matrix for one or many relative velocities ``z`` (..., 3)."""
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(z, axis=-1)
    if np.any(r == 0):
        raise SingularInputError("the Landau matrix is singular at z = 0")
    zh = z / r[..., None]
    proj = np.eye(3) - zh[..., :, None] * zh[..., None, :]
    return LANDAU_CONSTANT * (r ** (gamma + 2.0))[..., None, None] * proj


def _shell_rule(gamma, g, v, cfg):
    # kernel |z|^(gamma+2) times the shell Jacobian |z|^2 is carried by the first panel
    rule = build_radial_rule(gamma + 2.0, r_max=_extent(g, v, cfg.r_max), r_first=1.0, n_first=cfg.n_first,
                             n_panel=cfg.n_panel, panel_width=cfg.panel_width, vanishing_order=0.0)
    return rule, _direction_rule(g, v, cfg)


def matrix_convolutions(gamma, g: SmoothField, v, cfg: EvalConfig, need=("g", "hess")):
    """Convolutions of the collision matrix with ``g`` and its derivatives at ``v``.

    Returns a dict with any of ``"g"`` (3x3), ``"grad"`` (3-vector,
    ``sum_j a_ij * d_j g``) and ``"hess"`` (scalar ``a * : hess g``).
    """
    v = np.asarray(v, dtype=float)
    rule, dirs = _shell_rule(gamma, g, v, cfg)
    k = dirs.directions
    proj = np.eye(3)[None] - k[:, :, None] * k[:, None, :]
    pw = proj * dirs.weights[:, None, None]
    out = {"g": np.zeros((3, 3)), "grad": np.zeros(3), "hess": 0.0}
    for ri, wi in zip(rule.r, rule.weights):
        fac = wi * LANDAU_CONSTANT * ri ** (gamma + 4.0)
        pts = v - ri * k
        if "g" in need:
            out["g"] += fac * np.einsum("n,nij->ij", g.eval(pts), pw)
        if "grad" in need:
            out["grad"] += fac * np.einsum("nij,nj->i", pw, g.eval_grad(pts))
        if "hess" in need:
            out["hess"] += fac * np.einsum("nij,nij->", pw, g.eval_hess(pts))
    return out


def _eval_QL(gamma, g, h, v, cfg):
    conv = matrix_convolutions(gamma, g, v, cfg, need=("g", "hess"))
    return float(np.sum(conv["g"] * h.eval_hess(v)) - conv["hess"] * h.eval(v))


def eval_QL(gamma: float, g: SmoothField, h: SmoothField, v, cfg: EvalConfig | None = None) -> float:
    """Pointwise ``Q_L(g, h)(v)`` in non-divergence form."""
    cfg = cfg or EvalConfig()
    _check_gamma(gamma)
    if cfg.strict:
        return estimate_QL(gamma, g, h, v, cfg)[0]
    return _eval_QL(gamma, g, h, v, cfg)


def estimate_QL(gamma, g, h, v, cfg: EvalConfig | None = None):
    """Refined value and the difference between two refinement levels."""
    cfg = cfg or EvalConfig()
    _check_gamma(gamma)
    coarse = _eval_QL(gamma, g, h, v, cfg)
    fine = _eval_QL(gamma, g, h, v, cfg.refined())
    err = abs(fine - coarse)
    if cfg.strict and err > cfg.tol:
        raise ToleranceError(f"refinement levels differ by {err:.3e} > tol {cfg.tol:.1e}")
    return fine, err


def landau_flux(gamma, g, h, v, cfg: EvalConfig | None = None) -> np.ndarray:
    """``J(v) = int a(v - v_*) (g_* grad h(v) - h(v) grad g_*) dv_*``."""
    cfg = cfg or EvalConfig()
    conv = matrix_convolutions(gamma, g, v, cfg, need=("g", "grad"))
    return conv["g"] @ h.eval_grad(v) - h.eval(v) * conv["grad"]


def eval_QL_divergence(gamma, g, h, v, cfg: EvalConfig | None = None, step: float = 1e-3) -> float:
    """Divergence-form value by central differences of the flux (oracle only)."""
    cfg = cfg or EvalConfig()
    v = np.asarray(v, dtype=float)
    total = 0.0
    for i in range(3):
        e = np.zeros(3)
        e[i] = step
        total += (landau_flux(gamma, g, h, v + e, cfg)[i] - landau_flux(gamma, g, h, v - e, cfg)[i]) / (2 * step)
    return float(total)


def weak_QL(gamma: float, g: SmoothField, h: SmoothField, phi, cfg: EvalConfig | None = None,
            return_scale: bool = False):
    """``<Q_L(g, h), phi> = -int int grad phi(v) . a(u) (g_* grad h - h grad g_*) dv_* dv``."""
    cfg = cfg or EvalConfig()
    _check_gamma(gamma)
    if isinstance(phi, dict):
        phi = Polynomial.from_dict(phi)
    if isinstance(phi, Polynomial):
        grads = [phi.derivative(i) for i in range(3)]

        def grad_phi(x):
            return np.stack([q(x) for q in grads], axis=-1)

        if phi.degree == 0:
            return (0.0, 0.0) if return_scale else 0.0
    else:
        grad_phi = phi.eval_grad
    total, scale = 0.0, 0.0
    for th in h.terms:
        for tg in g.terms:
            nodes = pair_nodes(th, tg, gamma, cfg.pair)
            nV = nodes.n_V
            uh = np.repeat(nodes.u_hat, nV, axis=0)
            rr = np.repeat(nodes.r, nV)
            G, H = SmoothField((tg,)), SmoothField((th,))
            flux = G.eval(nodes.v_star)[:, None] * H.eval_grad(nodes.v) - H.eval(nodes.v)[:, None] * G.eval_grad(nodes.v_star)
            # projection orthogonal to u_hat
            flux = flux - np.einsum("ni,ni->n", flux, uh)[:, None] * uh
            dphi = grad_phi(nodes.v)
            integrand = -LANDAU_CONSTANT * rr ** (gamma + 2.0) * np.einsum("ni,ni->n", dphi, flux)
            total += float(np.dot(nodes.weights, integrand))
            scale += float(np.dot(nodes.weights, np.abs(integrand)))
    return (total, scale) if return_scale else total
