"""Decomposition of the Boltzmann operator around its grazing limit and rate studies.

For ``s < 1`` the operator splits pointwise as

    Q_B = 2^(s-1) Q_L + E2 + E3,

where ``E2`` is the convolution of the trace-free matrix
``U2(z) = (3/4 z z^T - 1/4 |z|^2 I) m4(s) |z|^gamma`` (``m4`` the
``sin^4(theta/2)`` moment of the angular kernel) against the second mixed
derivatives of ``g_* h``, and ``E3`` collects third-order Taylor remainders.
Here ``E3`` is defined by subtraction; :func:`remainder_direct` evaluates it
independently from the Taylor remainder formula.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import asdict, dataclass, field

import numpy as np

from .boltzmann import EvalConfig, _direction_rule, _extent, _radial_rule, _sigma_template, eval_Q
from .fields import SmoothField
from .geometry import build_angular_kernel_rule, gauss_legendre
from .kernel import KernelParams, scaling_factor, sin4_moment
from .landau import _shell_rule, eval_QL
from .parallel import ordered_map


def U2_matrix(s: float, gamma: float, z) -> np.ndarray:
    """``U2(z)`` for one or many ``z`` (..., 3)."""
    z = np.asarray(z, dtype=float)
    r2 = np.einsum("...i,...i->...", z, z)
    zz = z[..., :, None] * z[..., None, :]
    return sin4_moment(s) * (r2 ** (0.5 * gamma))[..., None, None] * (0.75 * zz - 0.25 * r2[..., None, None] * np.eye(3))


def u2_term(params: KernelParams, g: SmoothField, h: SmoothField, v, cfg: EvalConfig | None = None) -> float:
    """``int U2(v - v_*) : (grad_v - grad_*)^2 (g_* h) dv_*``.

    The mixed Hessian expands to
    ``hess g_* h - grad g_* (x) grad h - grad h (x) grad g_* + g_* hess h``.
    """
    cfg = cfg or EvalConfig()
    v = np.asarray(v, dtype=float)
    gamma = params.gamma
    rule, dirs = _shell_rule(gamma, g, v, cfg)
    k = dirs.directions
    shape = (0.75 * k[:, :, None] * k[:, None, :] - 0.25 * np.eye(3)[None]) * dirs.weights[:, None, None]
    conv_g = np.zeros((3, 3))
    conv_grad = np.zeros(3)
    conv_hess = 0.0
    for ri, wi in zip(rule.r, rule.weights):
        fac = wi * ri ** (gamma + 4.0)
        pts = v - ri * k
        conv_g += fac * np.einsum("n,nij->ij", g.eval(pts), shape)
        conv_grad += fac * np.einsum("nij,ni->j", shape, g.eval_grad(pts))
        conv_hess += fac * np.einsum("nij,nij->", shape, g.eval_hess(pts))
    m4 = sin4_moment(params.s)
    val = conv_hess * h.eval(v) - 2.0 * conv_grad @ h.eval_grad(v) + np.sum(conv_g * h.eval_hess(v))
    return float(m4 * val)


@dataclass
class DecompositionResult:
    """Parts of ``Q_B`` whose correctly rounded sum ``math.fsum`` is ``total`` bit for bit.

    ``exact`` is False only when no float triple of these magnitudes sums to
    ``total``; the reconstruction then misses by one unit in the last place.
    """

    leading: float
    u2_term: float
    remainder: float
    total: float
    exact: bool = True

    def reconstructed(self) -> float:
        return math.fsum((self.leading, self.u2_term, self.remainder))

    def to_dict(self):
        return asdict(self)


_MAX_ULP_SHIFT = 4096


def _telescoping_parts(total, leading, u2):
    """Parts ``(leading, u2, remainder)`` whose exact sum is ``total``.

    The plain left-to-right float sum rounds its partial sum onto the grid of the
    largest part, so exactness is defined through the correctly rounded sum.  The
    finer of ``leading`` and ``u2`` moves by the fewest ulps that make
    ``total - leading - u2`` a float; both carry quadrature error far above that.
    """
    exact0 = Fraction(total) - Fraction(leading) - Fraction(u2)
    rem0 = float(exact0)
    if Fraction(rem0) == exact0:
        return float(leading), float(u2), rem0, True
    parts = [leading, u2]
    for idx in sorted(range(2), key=lambda i: math.ulp(parts[i])):
        if parts[idx] == 0.0:
            continue
        step = math.ulp(parts[idx])
        max_k = min(int(math.ulp(rem0) / step) + 2, _MAX_ULP_SHIFT)
        for k in sorted(range(-max_k, max_k + 1), key=abs):
            trial = list(parts)
            trial[idx] = parts[idx] + k * step
            exact_rem = Fraction(total) - Fraction(trial[0]) - Fraction(trial[1])
            rem = float(exact_rem)
            if Fraction(rem) == exact_rem:
                return trial[0], trial[1], rem, True
    return float(leading), float(u2), rem0, False


def decompose(params: KernelParams, g, h, v, cfg: EvalConfig | None = None, q_value: float | None = None,
              ql_value: float | None = None) -> DecompositionResult:
    """Split ``Q_B(g, h)(v)`` into the scaled Landau value, the U2 term and the remainder.

    Precomputed ``q_value`` / ``ql_value`` may be passed to avoid re-evaluation.
    """
    cfg = cfg or EvalConfig()
    q = eval_Q(params, g, h, v, cfg) if q_value is None else q_value
    ql = eval_QL(params.gamma, g, h, v, cfg) if ql_value is None else ql_value
    leading = scaling_factor(params.s) * ql
    u2 = u2_term(params, g, h, v, cfg)
    lead, u2, rem, exact = _telescoping_parts(q, leading, u2)
    return DecompositionResult(lead, u2, rem, q, exact)


def remainder_direct(params: KernelParams, g: SmoothField, h: SmoothField, v, cfg: EvalConfig | None = None,
                     n_line: int = 6) -> float:
    """Direct quadrature of the third-order remainder integral.

    With ``A = 2 (v' - v)`` the integrand combines the line integrals

        r1 = 1/16 int_0^1 (1-k)^2 A A A : d^3 h(v + k (v' - v)) dk,
        r2 = -1/16 int_0^1 (1-i)^2 A A A : d^3 g(v_* + i (v'_* - v_*)) di,

    with the second-order Taylor polynomials of ``h`` at ``v`` and ``g`` at
    ``v_*``.
    """
    cfg = cfg or EvalConfig()
    v = np.asarray(v, dtype=float)
    gamma = params.gamma
    rule = _radial_rule(gamma, params.eta, _extent(g, v, cfg.r_max), cfg)
    dirs = _direction_rule(g, v, cfg)
    ang = build_angular_kernel_rule(params.s, cfg.n_w, cfg.n_phi)
    sig = _sigma_template(dirs, ang)
    k = dirs.directions
    x, wx = gauss_legendre(n_line)
    kap = 0.5 * (x + 1.0)
    wk = 0.5 * wx * (1.0 - kap) ** 2
    hv = float(h.eval(v))
    gh = h.eval_grad(v)
    Hh = h.eval_hess(v)
    total = 0.0
    for ri, wi in zip(rule.r, rule.weights):
        A = ri * (sig - k[:, None, None, :])  # (nd, nw, nphi, 3)
        vs = v - ri * k
        gs = g.eval(vs)[:, None, None]
        gg = g.eval_grad(vs)[:, None, None, :]
        Hg = g.eval_hess(vs)[:, None, None, :, :]
        r1 = 0.0
        r2 = 0.0
        for kk, ww in zip(kap, wk):
            t3h = h.eval_third(v + 0.5 * kk * A)
            r1 = r1 + ww * np.einsum("...ijk,...i,...j,...k->...", t3h, A, A, A)
            t3g = g.eval_third(vs[:, None, None, :] - 0.5 * kk * A)
            r2 = r2 + ww * np.einsum("...ijk,...i,...j,...k->...", t3g, A, A, A)
        r1 = r1 / 16.0
        r2 = -r2 / 16.0
        A_dg = np.einsum("...i,...i->...", A, gg)
        AA_Hg = np.einsum("...i,...ij,...j->...", A, Hg, A)
        AA_Hh = np.einsum("...i,ij,...j->...", A, Hh, A)
        A_dh = A @ gh
        R1 = (
            r1 * (gs - 0.5 * A_dg + AA_Hg / 8.0 + r2)
            + AA_Hh / 8.0 * (-0.5 * A_dg + AA_Hg / 8.0 + r2)
            + 0.5 * A_dh * (AA_Hg / 8.0 + r2)
            + hv * r2
        )
        F = np.dot(R1.mean(axis=-1) @ ang.weights, dirs.weights)
        total += wi * ri ** (gamma + 2.0) * F
    return float(total)


# ---------------------------------------------------------------------------
# Rate study
# ---------------------------------------------------------------------------


@dataclass
class RateReport:
    """Operator-level grazing rate: ``E(s) = max_v |Q_B - Q_L|`` against ``1 - s``."""

    gamma: float
    s_values: list
    errors: list
    fitted_slope: float
    fit_residual: float
    fitted_constant: float
    leading: list = field(default_factory=list)
    u2: list = field(default_factory=list)
    remainder: list = field(default_factory=list)
    error_estimates: list = field(default_factory=list)
    monotone: bool = True
    degenerate: bool = False
    compare_scaled: bool = False

    def csv_rows(self):
        for i, s in enumerate(self.s_values):
            yield (s, 1.0 - s, self.errors[i], self.leading[i], self.u2[i], self.remainder[i])

    def to_dict(self):
        return asdict(self)


def fit_loglog(x, y):
    """Least-squares slope of ``log y`` against ``log x`` with RMS residual.

    Returns ``(slope, residual, constant)`` where ``y ~ constant * x**slope``.
    """
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    M = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, *_ = np.linalg.lstsq(M, ly, rcond=None)
    res = ly - M @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res**2))), float(math.exp(coef[1]))


def _cell_landau(args):
    gamma, g, h, v, cfg = args
    return eval_QL(gamma, g, h, v, cfg), abs(eval_QL(gamma, g, h, v, cfg.refined()) - eval_QL(gamma, g, h, v, cfg))


def _cell_boltzmann(args):
    s, gamma, eta, g, h, v, cfg, ql = args
    params = KernelParams(s, gamma, eta)
    q = eval_Q(params, g, h, v, cfg)
    q_fine = eval_Q(params, g, h, v, cfg.refined())
    dec = decompose(params, g, h, v, cfg, q_value=q, ql_value=ql)
    return q, abs(q_fine - q), dec


def convergence_study(gamma: float, g: SmoothField, h: SmoothField, sample_points, s_list,
                      cfg: EvalConfig | None = None, workers: int = 1, eta: float = 1.0,
                      compare_scaled: bool = False) -> RateReport:
    """Fit the rate of ``max_v |Q_B(s) - Q_L|`` in ``1 - s``.

    With ``compare_scaled`` the comparison target is ``2^(s-1) Q_L``.
    """
    cfg = cfg or EvalConfig()
    s_list = [float(s) for s in s_list]
    if len(s_list) < 4:
        raise ValueError("a rate study needs at least four values of s")
    if any(b <= a for a, b in zip(s_list[:-1], s_list[1:])):
        raise ValueError("s values must increase strictly")
    pts = [np.asarray(p, dtype=float) for p in sample_points]
    lan = ordered_map(_cell_landau, [(gamma, g, h, p, cfg) for p in pts], workers)
    cells = [(s, gamma, eta, g, h, p, cfg, lan[j][0]) for s in s_list for j, p in enumerate(pts)]
    res = ordered_map(_cell_boltzmann, cells, workers)
    errors, est, leads, u2s, rems = [], [], [], [], []
    for i, s in enumerate(s_list):
        best, best_j = -1.0, 0
        err_est = 0.0
        for j in range(len(pts)):
            q, qerr, _ = res[i * len(pts) + j]
            target = lan[j][0] * (scaling_factor(s) if compare_scaled else 1.0)
            e = abs(q - target)
            err_est = max(err_est, qerr + lan[j][1])
            if e > best:
                best, best_j = e, j
        dec = res[i * len(pts) + best_j][2]
        errors.append(best)
        est.append(err_est)
        leads.append(dec.leading)
        u2s.append(dec.u2_term)
        rems.append(dec.remainder)
    oms = [1.0 - s for s in s_list]
    degenerate = all(e <= 10.0 * x for e, x in zip(errors, est))
    if min(errors) <= 0.0:
        slope, resid, const = float("nan"), float("nan"), float("nan")
        degenerate = True
    else:
        slope, resid, const = fit_loglog(oms, errors)
    monotone = all(b < a for a, b in zip(errors[:-1], errors[1:]))
    return RateReport(gamma, s_list, errors, slope, resid, const, leads, u2s, rems, est, monotone, degenerate,
                      compare_scaled)
