"""Linearization around the Maxwellian, Galerkin assembly and the anisotropic norm.

Perturbations are written ``F = mu + sqrt(mu) f``.  The Galerkin space is
``sqrt(mu)`` times polynomials of total degree at most ``D``, orthonormalized
in ``L^2``.  All matrix elements are weak-form integrals against the Gaussian
pair ``mu(v) mu(v_*)`` and are computed with a rule that is exact for this
polynomial data.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.special import sph_harm_y

from .boltzmann import EvalConfig, _angular_for_weak, eval_Q
from .fields import (
    MU_NORM,
    Polynomial,
    SmoothField,
    maxwellian,
    monomial_exponents,
    multiply_sqrt_mu,
    sqrt_maxwellian,
)
from .geometry import _frame_from_axis, gauss_hermite_3d, gauss_laguerre, gauss_legendre
from .kernel import KernelParams, ParameterError
from .landau import LANDAU_CONSTANT, eval_QL
from .pairs import PairRuleSpec, pair_nodes


class BasisError(RuntimeError):
    """The Galerkin basis failed its orthonormality check."""


# ---------------------------------------------------------------------------
# Operator mode
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearMode:
    """Which collision operator to linearize: ``kind`` is "boltzmann" or "landau"."""

    kind: str
    gamma: float
    s: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("boltzmann", "landau"):
            raise ParameterError(f"unknown operator kind {self.kind!r}")
        if self.kind == "boltzmann":
            KernelParams(self.s, self.gamma, self.eta).require_operator_grade()

    @property
    def params(self) -> KernelParams:
        return KernelParams(self.s, self.gamma, self.eta)

    @classmethod
    def boltzmann(cls, s, gamma, eta=1.0):
        return cls("boltzmann", float(gamma), float(s), float(eta))

    @classmethod
    def landau(cls, gamma):
        return cls("landau", float(gamma))


def _apply_operator(mode: LinearMode, G: SmoothField, H: SmoothField, v, cfg):
    if mode.kind == "boltzmann":
        return eval_Q(mode.params, G, H, v, cfg)
    return eval_QL(mode.gamma, G, H, v, cfg)


# ---------------------------------------------------------------------------
# Gaussian moments and polynomial tables
# ---------------------------------------------------------------------------


def _moment_1d(k: int) -> float:
    """``E[x^k]`` for a standard normal variable."""
    if k % 2:
        return 0.0
    out = 1.0
    for j in range(k - 1, 0, -2):
        out *= j
    return out


def maxwellian_moment(exp) -> float:
    """``int v^exp mu(v) dv`` in closed form."""
    return _moment_1d(exp[0]) * _moment_1d(exp[1]) * _moment_1d(exp[2])


def monomial_table(x: np.ndarray, exps) -> np.ndarray:
    """Values of monomials ``x^e`` for all exponents; shape (..., len(exps))."""
    deg = max(sum(e) for e in exps)
    pw = [[np.ones(x.shape[:-1])] for _ in range(3)]
    for a in range(3):
        for _ in range(deg):
            pw[a].append(pw[a][-1] * x[..., a])
    return np.stack([pw[0][e[0]] * pw[1][e[1]] * pw[2][e[2]] for e in exps], axis=-1)


def monomial_grad_table(x: np.ndarray, exps) -> np.ndarray:
    """Gradients of monomials; shape (..., len(exps), 3)."""
    deg = max(sum(e) for e in exps)
    pw = [[np.ones(x.shape[:-1])] for _ in range(3)]
    for a in range(3):
        for _ in range(deg):
            pw[a].append(pw[a][-1] * x[..., a])

    def p(a, k):
        return pw[a][k] if k >= 0 else np.zeros(x.shape[:-1])

    cols = []
    for e in exps:
        cols.append(np.stack([
            e[0] * p(0, e[0] - 1) * p(1, e[1]) * p(2, e[2]),
            e[1] * p(0, e[0]) * p(1, e[1] - 1) * p(2, e[2]),
            e[2] * p(0, e[0]) * p(1, e[1]) * p(2, e[2] - 1),
        ], axis=-1))
    return np.stack(cols, axis=-2)


# ---------------------------------------------------------------------------
# Bases
# ---------------------------------------------------------------------------


def kernel_basis() -> list[SmoothField]:
    """Orthonormal basis ``sqrt(mu) {1, v1, v2, v3, (|v|^2 - 3)/sqrt 6}`` of the collision invariants."""
    polys = [
        Polynomial.constant(),
        Polynomial.coordinate(0),
        Polynomial.coordinate(1),
        Polynomial.coordinate(2),
        Polynomial.from_dict({(2, 0, 0): 1 / math.sqrt(6), (0, 2, 0): 1 / math.sqrt(6), (0, 0, 2): 1 / math.sqrt(6),
                              (0, 0, 0): -3 / math.sqrt(6)}),
    ]
    return [SmoothField.gaussian(p, width=0.25, coef=MU_NORM**0.5) for p in polys]


@dataclass(frozen=True)
class GalerkinBasis:
    """``phi_i = sqrt(mu) P_i`` with ``P_i = sum_e coeffs[i, e] v^e``.

    The first five members are the collision invariants of :func:`kernel_basis`.
    """

    degree: int
    exponents: tuple
    coeffs: np.ndarray

    @property
    def size(self) -> int:
        return self.coeffs.shape[0]

    def polynomial(self, i: int) -> Polynomial:
        return Polynomial.from_dict({e: c for e, c in zip(self.exponents, self.coeffs[i]) if abs(c) > 0})

    def field(self, i: int) -> SmoothField:
        return SmoothField.gaussian(self.polynomial(i), width=0.25, coef=MU_NORM**0.5)

    def poly_values(self, x):
        return monomial_table(x, self.exponents) @ self.coeffs.T

    def poly_grads(self, x):
        return np.einsum("...ec,ie->...ic", monomial_grad_table(x, self.exponents), self.coeffs)

    def gram(self) -> np.ndarray:
        M = np.array([[maxwellian_moment(tuple(a + b for a, b in zip(e1, e2))) for e2 in self.exponents]
                      for e1 in self.exponents])
        return self.coeffs @ M @ self.coeffs.T

    def coefficients_of(self, f: SmoothField, n: int = 8) -> np.ndarray:
        """``<f, phi_i>`` by Gauss-Hermite quadrature of ``sqrt(mu) f P_i``."""
        return np.array([inner_product(f, self.field(i), n) for i in range(self.size)])

    def perturbation(self, c) -> SmoothField:
        """``f = sum c_i phi_i`` as a single-term field."""
        poly = np.asarray(c) @ self.coeffs
        return SmoothField.gaussian(Polynomial.from_dict(dict(zip(self.exponents, poly))), width=0.25,
                                    coef=MU_NORM**0.5)


def build_galerkin_basis(degree: int = 4) -> GalerkinBasis:
    """Gram-Schmidt (twice) of ``[1, v1, v2, v3, |v|^2, remaining monomials]`` in ``L^2(mu)``."""
    if not 1 <= degree <= 4:
        raise ParameterError("basis degree must lie in 1..4")
    exps = monomial_exponents(degree)
    idx = {e: i for i, e in enumerate(exps)}
    n = len(exps)
    M = np.array([[maxwellian_moment(tuple(a + b for a, b in zip(e1, e2))) for e2 in exps] for e1 in exps])
    cands = []
    for e in [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]:
        c = np.zeros(n)
        c[idx[e]] = 1.0
        cands.append(c)
    if degree >= 2:
        c = np.zeros(n)
        for e in [(2, 0, 0), (0, 2, 0), (0, 0, 2)]:
            c[idx[e]] = 1.0
        cands.append(c)
    for e in exps:
        if sum(e) >= 2:
            c = np.zeros(n)
            c[idx[e]] = 1.0
            cands.append(c)
    basis = []
    for c in cands:
        x = c.copy()
        for _ in range(2):
            for b in basis:
                x = x - (b @ M @ x) * b
        nrm = math.sqrt(max(x @ M @ x, 0.0))
        if nrm < 1e-8:
            continue
        x = x / nrm
        # fix the sign so the leading monomial coefficient is positive
        lead = np.flatnonzero(np.abs(x) > 1e-12)
        if lead.size and x[lead[-1]] < 0:
            x = -x
        basis.append(x)
    C = np.array(basis)
    gb = GalerkinBasis(degree, tuple(exps), C)
    err = np.abs(gb.gram() - np.eye(gb.size)).max()
    if err > 1e-8:
        raise BasisError(f"Gram matrix deviates from identity by {err:.2e}")
    return gb


def inner_product(f: SmoothField, g: SmoothField, n: int = 8) -> float:
    """``int f g dv`` by Gauss-Hermite quadrature adapted to each term pair."""
    total = 0.0
    z, wz = gauss_hermite_3d(n)
    for t1 in f.terms:
        for t2 in g.terms:
            a = t1.width + t2.width
            c = (t1.width * np.asarray(t1.center) + t2.width * np.asarray(t2.center)) / a
            x = c + z / math.sqrt(a)
            w = wz * np.exp(np.einsum("ij,ij->i", z, z)) * a**-1.5
            vals = SmoothField((t1,)).eval(x) * SmoothField((t2,)).eval(x)
            total += float(np.dot(w, vals))
    return total


def project_P(f: SmoothField, n: int = 8):
    """Macroscopic projection ``P f = (a + b.v + c |v|^2) sqrt(mu)``.

    Returns
    -------
    a : float
    b : ndarray, shape (3,)
    c : float
    Pf : SmoothField
    """
    sm = sqrt_maxwellian()
    fa = Polynomial.from_dict({(0, 0, 0): 2.5, (2, 0, 0): -0.5, (0, 2, 0): -0.5, (0, 0, 2): -0.5})
    fc = Polynomial.from_dict({(0, 0, 0): -0.5, (2, 0, 0): 1 / 6, (0, 2, 0): 1 / 6, (0, 0, 2): 1 / 6})
    a = inner_product(sm.times_poly(fa), f, n)
    b = np.array([inner_product(sm.times_poly(Polynomial.coordinate(i)), f, n) for i in range(3)])
    c = inner_product(sm.times_poly(fc), f, n)
    poly = Polynomial.from_dict({(0, 0, 0): a, (1, 0, 0): b[0], (0, 1, 0): b[1], (0, 0, 1): b[2],
                                 (2, 0, 0): c, (0, 2, 0): c, (0, 0, 2): c})
    return a, b, c, sm.times_poly(poly)


# ---------------------------------------------------------------------------
# Pointwise linearized operators
# ---------------------------------------------------------------------------


def gamma_bilinear(mode: LinearMode, g: SmoothField, h: SmoothField, v, cfg: EvalConfig | None = None) -> float:
    """``mu^(-1/2) Q(sqrt(mu) g, sqrt(mu) h)`` at ``v``."""
    cfg = cfg or EvalConfig()
    v = np.asarray(v, dtype=float)
    val = _apply_operator(mode, multiply_sqrt_mu(g), multiply_sqrt_mu(h), v, cfg)
    return float(val / sqrt_maxwellian().eval(v))


def L_apply(mode: LinearMode, f: SmoothField, v, cfg: EvalConfig | None = None) -> float:
    """``L f = -Gamma(sqrt(mu), f) - Gamma(f, sqrt(mu))`` at ``v``."""
    cfg = cfg or EvalConfig()
    v = np.asarray(v, dtype=float)
    mu = maxwellian()
    F = multiply_sqrt_mu(f)
    val = _apply_operator(mode, mu, F, v, cfg) + _apply_operator(mode, F, mu, v, cfg)
    return float(-val / sqrt_maxwellian().eval(v))


# ---------------------------------------------------------------------------
# Galerkin assembly
# ---------------------------------------------------------------------------


def _mu_pair_nodes(gamma, spec: PairRuleSpec):
    mu_term = maxwellian().terms[0]
    return pair_nodes(mu_term, mu_term, gamma, spec)


def _chunks(n, size):
    for a in range(0, n, size):
        yield slice(a, min(n, a + size))


def _boltzmann_arrays(mode: LinearMode, basis: GalerkinBasis, spec: PairRuleSpec, with_tensor: bool):
    params = mode.params
    nodes = _mu_pair_nodes(params.gamma, spec)
    nV = nodes.n_V
    rr = np.repeat(nodes.r, nV)
    uh = np.repeat(nodes.u_hat, nV, axis=0)
    mu = maxwellian()
    base = nodes.weights * mu.eval(nodes.v) * mu.eval(nodes.v_star) * rr**params.gamma
    ang = _angular_for_weak(params.s, basis.degree, None)
    n = basis.size
    M = np.zeros((n, n))
    T = np.zeros((n, n, n)) if with_tensor else None
    for sl in _chunks(len(base), 20000):
        v, vs, r, k = nodes.v[sl], nodes.v_star[sl], rr[sl], uh[sl]
        h1, h2 = _frame_from_axis(k)
        Pv = basis.poly_values(v)
        Ps = basis.poly_values(vs)
        D = np.zeros_like(Pv)
        for p in range(len(ang.w)):
            st, ct = ang.sin_theta[p], ang.cos_theta[p]
            acc = np.zeros_like(Pv)
            for ph in ang.phi:
                sig = st * (math.cos(ph) * h1 + math.sin(ph) * h2) + ct * k
                acc += basis.poly_values(v + 0.5 * r[:, None] * (sig - k))
            D += ang.weights[p] * (acc / len(ang.phi) - Pv)
        b = base[sl]
        M -= ((Pv + Ps) * b[:, None]).T @ D
        if with_tensor:
            for i in range(n):
                T[i] += ((Ps[:, i] * b)[:, None] * Pv).T @ D
    return M, T


def _landau_arrays(mode: LinearMode, basis: GalerkinBasis, spec: PairRuleSpec, with_tensor: bool):
    gamma = mode.gamma
    nodes = _mu_pair_nodes(gamma, spec)
    nV = nodes.n_V
    rr = np.repeat(nodes.r, nV)
    uh = np.repeat(nodes.u_hat, nV, axis=0)
    mu = maxwellian()
    base = nodes.weights * mu.eval(nodes.v) * mu.eval(nodes.v_star) * LANDAU_CONSTANT * rr ** (gamma + 2.0)
    n = basis.size
    M = np.zeros((n, n))
    T = np.zeros((n, n, n)) if with_tensor else None
    chunk = 4000 if with_tensor else 20000
    for sl in _chunks(len(base), chunk):
        v, vs, k = nodes.v[sl], nodes.v_star[sl], uh[sl]
        b = base[sl]
        Gv = basis.poly_grads(v)  # (N, n, 3)
        Gs = basis.poly_grads(vs)
        X = Gv - np.einsum("nic,nc->ni", Gv, k)[:, :, None] * k[:, None, :]  # projected grad P(v)
        M += np.einsum("n,njc,nic->ij", b, X, Gv - Gs)
        if with_tensor:
            Pv = basis.poly_values(v)
            Ps = basis.poly_values(vs)
            Y = np.einsum("njc,nkc->njk", Gv, X).reshape(len(b), -1)  # grad P_j(v) . X_k
            Z = np.einsum("nic,nkc->nik", Gs, X).reshape(len(b), -1)  # grad P_i(v_*) . X_k
            T1 = ((Ps * b[:, None]).T @ Y).reshape(n, n, n)  # [i, j, k]
            T2 = ((Pv * b[:, None]).T @ Z).reshape(n, n, n)  # [j, i, k]
            T -= T1 - np.transpose(T2, (1, 0, 2))
    return M, T


def galerkin_arrays(mode: LinearMode, basis: GalerkinBasis, cfg: EvalConfig | None = None,
                    with_tensor: bool = False):
    """Raw matrix ``<L phi_i, phi_j>`` and optionally ``<Gamma(phi_i, phi_j), phi_k>``."""
    cfg = cfg or EvalConfig()
    fn = _boltzmann_arrays if mode.kind == "boltzmann" else _landau_arrays
    return fn(mode, basis, cfg.pair, with_tensor)


@dataclass
class SpectrumReport:
    eigenvalues: list
    kernel_count: int
    gap: float
    threshold: float
    asymmetry: float
    kernel_residual: float
    min_eigenvalue: float
    mode: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def spectrum_report(M_raw: np.ndarray, mode: LinearMode | None = None) -> tuple[np.ndarray, SpectrumReport]:
    M = 0.5 * (M_raw + M_raw.T)
    asym = float(np.abs(M_raw - M_raw.T).max() / max(np.abs(M_raw).max(), 1e-300))
    ev = np.linalg.eigvalsh(M)
    count = _kernel_count(ev)
    gap = float(np.sort(np.abs(ev))[count]) if count < len(ev) else float("nan")
    kres = float(np.abs(M[:, :5]).max()) if M.shape[0] >= 5 else float("nan")
    rep = SpectrumReport([float(x) for x in ev], count, gap, 1e-4 * abs(gap), asym, kres, float(ev[0]),
                         asdict(mode) if mode is not None else {})
    return M, rep


def _kernel_count(ev: np.ndarray, expected: int = 5) -> int:
    """Size of the near-zero cluster, iterated to a fixed point.

    Starting from ``expected`` members, the gap candidate is the smallest
    magnitude outside the cluster and the cluster is redefined as every
    eigenvalue with ``|lambda| <= 1e-4 * gap``.
    """
    mags = np.sort(np.abs(ev))
    count = min(expected, len(ev) - 1)
    seen = set()
    while count not in seen and count < len(ev):
        seen.add(count)
        count = int(np.sum(mags <= 1e-4 * mags[count]))
    return count


def assemble_L_matrix(mode: LinearMode, basis: GalerkinBasis, cfg: EvalConfig | None = None):
    """Symmetrized Galerkin matrix of the linearized operator and its spectrum report."""
    M_raw, _ = galerkin_arrays(mode, basis, cfg)
    return spectrum_report(M_raw, mode)


# ---------------------------------------------------------------------------
# Eigenfunction-quotient oracle
# ---------------------------------------------------------------------------

#: Polynomial factors of sqrt(mu)-weighted eigenfunctions of the gamma = 0
#: linearized operator with total degree <= 4, labelled (radial index, harmonic degree).
BURNETT_MODES = {
    (0, 2): {(1, 1, 0): 1.0},
    (1, 1): {(3, 0, 0): 1.0, (1, 2, 0): 1.0, (1, 0, 2): 1.0, (1, 0, 0): -5.0},
    (0, 3): {(1, 1, 1): 1.0},
    (2, 0): {(4, 0, 0): 1.0, (0, 4, 0): 1.0, (0, 0, 4): 1.0, (2, 2, 0): 2.0, (2, 0, 2): 2.0, (0, 2, 2): 2.0,
             (2, 0, 0): -10.0, (0, 2, 0): -10.0, (0, 0, 2): -10.0, (0, 0, 0): 15.0},
    (1, 2): {(3, 1, 0): 1.0, (1, 3, 0): 1.0, (1, 1, 2): 1.0, (1, 1, 0): -7.0},
    (0, 4): {(3, 1, 0): 1.0, (1, 3, 0): -1.0},
}


#: Quadrature for the oracle; the direction rule refines itself at large |v|.
ORACLE_CONFIG = EvalConfig()


def rayleigh_quotient_radial(mode: LinearMode, poly: Polynomial, cfg: EvalConfig | None = None,
                             direction=(1.0, 2.0, 3.0), n_r: int = 5) -> float:
    """``<L phi, phi> / <phi, phi>`` for ``phi = sqrt(mu) poly`` along one ray.

    Valid when ``L phi`` shares the angular profile of ``phi`` (rotation
    covariance for a single spherical-harmonic mode).  The radial integral
    uses generalized Gauss-Laguerre in ``|v|^2/2`` with exponent 1/2.
    """
    cfg = cfg or ORACLE_CONFIG
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    t, w = gauss_laguerre(n_r, 0.5)
    r = np.sqrt(2.0 * t)
    phi = SmoothField.gaussian(poly, width=0.25, coef=MU_NORM**0.5)
    num, den = 0.0, 0.0
    for ri, wi in zip(r, w):
        v = ri * e
        pv = float(phi.eval(v))
        lv = L_apply(mode, phi, v, cfg)
        scale = math.exp(0.5 * ri * ri)  # removes the exp(-|v|^2/2) of the product
        num += wi * lv * pv * scale
        den += wi * pv * pv * scale
    return num / den


def gap_oracle(mode: LinearMode, cfg: EvalConfig | None = None, degree: int = 4):
    """Lowest eigenfunction quotient over the modes of total degree <= ``degree``.

    Returns ``(value, label, all_quotients)``.
    """
    quotients = {}
    for label, poly in BURNETT_MODES.items():
        if 2 * label[0] + label[1] <= degree:
            quotients[label] = rayleigh_quotient_radial(mode, Polynomial.from_dict(poly), cfg)
    label = min(quotients, key=quotients.get)
    return quotients[label], label, quotients


# ---------------------------------------------------------------------------
# Anisotropic norm
# ---------------------------------------------------------------------------


def _real_sph_harm(l, m, theta, phi):
    """Orthonormal real spherical harmonics (polar angle ``theta``)."""
    if m == 0:
        return np.real(sph_harm_y(l, 0, theta, phi))
    Y = sph_harm_y(l, abs(m), theta, phi)
    if m > 0:
        return math.sqrt(2.0) * (-1) ** m * np.real(Y)
    return math.sqrt(2.0) * (-1) ** m * np.imag(Y)


@dataclass
class HarmonicExpansion:
    """Real spherical-harmonic coefficients ``f_lm(r)`` on a radial grid.

    ``coeffs[l][m + l]`` holds the samples of ``f_lm`` at ``r``; the radial
    grid is Gauss-Legendre on ``[0, r_max]`` with weights ``r_weights``.
    """

    r: np.ndarray
    r_weights: np.ndarray
    l_max: int
    coeffs: list
    r_max: float
    parseval_error: float = 0.0

    @classmethod
    def from_field(cls, f: SmoothField, l_max: int = 8, r_max: float = 10.0, n_r: int = 48) -> "HarmonicExpansion":
        x, w = gauss_legendre(n_r)
        r = 0.5 * r_max * (x + 1.0)
        wr = 0.5 * r_max * w
        nt = l_max + 2
        ct, wt = gauss_legendre(nt)
        theta = np.arccos(ct)
        nph = 2 * l_max + 2
        ph = 2 * math.pi * np.arange(nph) / nph
        TH, PH = np.meshgrid(theta, ph, indexing="ij")
        W = np.outer(wt, np.full(nph, 2 * math.pi / nph))
        dirs = np.stack([np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH), np.cos(TH)], axis=-1)
        vals = f.eval(r[:, None, None, None] * dirs[None])  # (nr, nt, nph)
        coeffs = []
        energy = np.zeros(n_r)
        for l in range(l_max + 1):
            row = []
            for m in range(-l, l + 1):
                Y = _real_sph_harm(l, m, TH, PH)
                c = np.einsum("rij,ij->r", vals, Y * W)
                row.append(c)
                energy += c * c
            coeffs.append(np.array(row))
        # Parseval check against a finer sphere rule
        ct2, wt2 = gauss_legendre(2 * l_max + 8)
        nph2 = 4 * l_max + 16
        th2 = np.arccos(ct2)
        ph2 = 2 * math.pi * np.arange(nph2) / nph2
        TH2, PH2 = np.meshgrid(th2, ph2, indexing="ij")
        W2 = np.outer(wt2, np.full(nph2, 2 * math.pi / nph2))
        d2 = np.stack([np.sin(TH2) * np.cos(PH2), np.sin(TH2) * np.sin(PH2), np.cos(TH2)], axis=-1)
        full = np.einsum("rij,ij->r", f.eval(r[:, None, None, None] * d2[None]) ** 2, W2)
        err = float(np.dot(wr * r * r, np.abs(full - energy)) / max(np.dot(wr * r * r, full), 1e-300))
        return cls(r, wr, l_max, coeffs, r_max, err)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Reconstruct ``f`` at points (..., 3); zero outside ``r_max``."""
        pts = np.asarray(points, dtype=float)
        rad = np.linalg.norm(pts, axis=-1)
        theta = np.arccos(np.clip(pts[..., 2] / np.where(rad > 0, rad, 1.0), -1.0, 1.0))
        phi = np.arctan2(pts[..., 1], pts[..., 0])
        inside = rad <= self.r_max
        out = np.zeros(rad.shape)
        rin = rad[inside]
        for l in range(self.l_max + 1):
            for m in range(-l, l + 1):
                interp = BarycentricInterpolator(self.r, self.coeffs[l][m + l])
                out[inside] += interp(rin) * _real_sph_harm(l, m, theta[inside], phi[inside])
        return out


def anisotropic_norm(f: HarmonicExpansion, s: float, l: float, grid: int = 64, box: float = 8.0,
                     parseval_tol: float = 1e-6, return_parts: bool = False):
    """Three-term anisotropic norm with spherical, Fourier and plain weights.

    ``|f|^2 = |W_s(sphere) W_l f|^2 + |W_s(D) W_l f|^2 + |W_s W_l f|^2`` where
    ``W_l = <v>^l``, the spherical weight on degree ``L`` is
    ``(1 + L(L+1))^(s/2)``, and ``W_s(D)`` multiplies the Fourier transform
    by ``<xi>^s``.
    """
    if f.parseval_error > parseval_tol:
        raise ValueError(f"harmonic expansion fails the Parseval check ({f.parseval_error:.2e})")
    r, wr = f.r, f.r_weights
    wl2 = (1.0 + r * r) ** l
    sph = 0.0
    plain_sph = 0.0
    for deg in range(f.l_max + 1):
        e = np.sum(f.coeffs[deg] ** 2, axis=0)
        sph += (1.0 + deg * (deg + 1)) ** s * np.dot(wr, r * r * wl2 * e)
    x = (np.arange(grid) - grid // 2) * (2 * box / grid)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    pts = np.stack([X, Y, Z], axis=-1)
    hgrid = 2 * box / grid
    u = f.evaluate(pts) * (1.0 + np.sum(pts**2, axis=-1)) ** (0.5 * l)
    U = np.fft.fftn(u)
    k = 2 * math.pi * np.fft.fftfreq(grid, d=hgrid)
    KX, KY, KZ = np.meshgrid(k, k, k, indexing="ij")
    weight = (1.0 + KX**2 + KY**2 + KZ**2) ** s
    fourier = float(hgrid**3 / grid**3 * np.sum(weight * np.abs(U) ** 2))
    plain_grid = float(hgrid**3 * np.sum(u * u))
    for deg in range(f.l_max + 1):
        plain_sph += np.dot(wr, r * r * wl2 * np.sum(f.coeffs[deg] ** 2, axis=0))
    plain = plain_sph
    total = math.sqrt(sph + fourier + plain)
    if return_parts:
        return total, {"spherical": sph, "fourier": fourier, "plain": plain, "plain_grid": plain_grid}
    return total
