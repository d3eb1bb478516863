"""Closed-form velocity fields: sums of polynomial x Gaussian terms.

A :class:`SmoothField` represents

    f(v) = sum_k  c_k p_k(v) exp(-a_k |v - v0_k|^2)

with polynomials ``p_k`` of total degree at most :data:`MAX_DEGREE`.  Values
and derivatives up to third order are evaluated analytically and vectorized
over arbitrary leading shapes of ``v``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

MAX_DEGREE = 4

Exponent = tuple[int, int, int]


class CapacityError(ValueError):
    """Raised when an operation would exceed the polynomial degree cap."""


def monomial_exponents(degree: int) -> list[Exponent]:
    """All exponent triples of total degree <= ``degree``, graded order."""
    out = []
    for d in range(degree + 1):
        for i in range(d, -1, -1):
            for j in range(d - i, -1, -1):
                out.append((i, j, d - i - j))
    return out


@dataclass(frozen=True)
class Polynomial:
    """Sparse polynomial in three variables.

    ``coeffs`` is a sorted tuple of ``(exponent, coefficient)`` pairs with
    nonzero coefficients only.
    """

    coeffs: tuple[tuple[Exponent, float], ...] = ()

    @classmethod
    def from_dict(cls, mapping: Mapping[Exponent, float]) -> "Polynomial":
        items = {}
        for e, c in mapping.items():
            e = tuple(int(x) for x in e)
            if len(e) != 3 or min(e) < 0:
                raise ValueError(f"bad exponent {e!r}")
            c = float(c)
            if c != 0.0:
                items[e] = items.get(e, 0.0) + c
        return cls(tuple(sorted((e, c) for e, c in items.items() if c != 0.0)))

    @classmethod
    def constant(cls, c: float = 1.0) -> "Polynomial":
        return cls.from_dict({(0, 0, 0): c})

    @classmethod
    def coordinate(cls, axis: int) -> "Polynomial":
        e = [0, 0, 0]
        e[axis] = 1
        return cls.from_dict({tuple(e): 1.0})

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.coeffs), default=0)

    def as_dict(self) -> dict[Exponent, float]:
        return dict(self.coeffs)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        d = self.as_dict()
        for e, c in other.coeffs:
            d[e] = d.get(e, 0.0) + c
        return Polynomial.from_dict(d)

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            return Polynomial.from_dict({e: c * other for e, c in self.coeffs})
        d: dict[Exponent, float] = {}
        for (e1, c1), (e2, c2) in itertools.product(self.coeffs, other.coeffs):
            e = (e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2])
            d[e] = d.get(e, 0.0) + c1 * c2
        return Polynomial.from_dict(d)

    __rmul__ = __mul__

    def derivative(self, axis: int) -> "Polynomial":
        return _derivative(self, axis)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return _eval_poly(self, _powers(v, self.degree))


@lru_cache(maxsize=4096)
def _derivative(p: Polynomial, axis: int) -> Polynomial:
    d = {}
    for e, c in p.coeffs:
        if e[axis] > 0:
            ne = list(e)
            ne[axis] -= 1
            d[tuple(ne)] = c * e[axis]
    return Polynomial.from_dict(d)


def _powers(v: np.ndarray, degree: int) -> list[list[np.ndarray]]:
    # pw[axis][k] = v[..., axis]**k
    pw = []
    for axis in range(3):
        x = v[..., axis]
        row = [np.ones_like(x)]
        for _ in range(degree):
            row.append(row[-1] * x)
        pw.append(row)
    return pw


def _eval_poly(p: Polynomial, pw) -> np.ndarray:
    shape = pw[0][0].shape
    out = np.zeros(shape)
    for (i, j, k), c in p.coeffs:
        term = c
        if i:
            term = term * pw[0][i]
        if j:
            term = term * pw[1][j]
        if k:
            term = term * pw[2][k]
        out = out + term
    return out


@dataclass(frozen=True)
class GaussianTerm:
    """One summand ``coef * poly(v) * exp(-width |v - center|^2)``."""

    coef: float
    poly: Polynomial
    width: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("Gaussian width must be positive")
        if self.poly.degree > MAX_DEGREE:
            raise CapacityError(f"polynomial degree {self.poly.degree} exceeds cap {MAX_DEGREE}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def _gauss(self, v):
        x = v - np.asarray(self.center)
        return x, np.exp(-self.width * np.einsum("...i,...i->...", x, x))


@lru_cache(maxsize=4096)
def _poly_derivs(p: Polynomial):
    d1 = tuple(p.derivative(i) for i in range(3))
    d2 = tuple(tuple(d1[i].derivative(j) for j in range(3)) for i in range(3))
    d3 = tuple(
        tuple(tuple(d2[i][j].derivative(k) for k in range(3)) for j in range(3)) for i in range(3)
    )
    return d1, d2, d3


@dataclass(frozen=True)
class SmoothField:
    """Finite sum of :class:`GaussianTerm` objects."""

    terms: tuple[GaussianTerm, ...]

    # -- construction ---------------------------------------------------
    @classmethod
    def gaussian(cls, poly=None, width: float = 0.5, center=(0.0, 0.0, 0.0), coef: float = 1.0):
        if poly is None:
            poly = Polynomial.constant()
        elif isinstance(poly, Mapping):
            poly = Polynomial.from_dict(poly)
        return cls((GaussianTerm(float(coef), poly, float(width), tuple(center)),))

    # -- algebra --------------------------------------------------------
    def __add__(self, other: "SmoothField") -> "SmoothField":
        return SmoothField(self.terms + other.terms)

    def __sub__(self, other: "SmoothField") -> "SmoothField":
        return self + other.scale(-1.0)

    def scale(self, c: float) -> "SmoothField":
        return SmoothField(tuple(GaussianTerm(t.coef * c, t.poly, t.width, t.center) for t in self.terms))

    __rmul__ = lambda self, c: self.scale(c)  # noqa: E731

    def shift(self, offset) -> "SmoothField":
        """Translate: returns ``v -> f(v - offset)``."""
        offset = np.asarray(offset, dtype=float)
        out = []
        for t in self.terms:
            out.append(GaussianTerm(t.coef, _shift_poly(t.poly, offset), t.width, tuple(np.asarray(t.center) + offset)))
        return SmoothField(tuple(out))

    def times_poly(self, poly: Polynomial) -> "SmoothField":
        return SmoothField(tuple(_term_times_poly(t, poly) for t in self.terms))

    def __mul__(self, other: "SmoothField") -> "SmoothField":
        if isinstance(other, (int, float)):
            return self.scale(other)
        out = []
        for t1, t2 in itertools.product(self.terms, other.terms):
            a = t1.width + t2.width
            c1, c2 = np.asarray(t1.center), np.asarray(t2.center)
            c = (t1.width * c1 + t2.width * c2) / a
            k = math.exp(-t1.width * t2.width / a * float(np.dot(c1 - c2, c1 - c2)))
            poly = t1.poly * t2.poly
            if poly.degree > MAX_DEGREE:
                raise CapacityError(f"product degree {poly.degree} exceeds cap {MAX_DEGREE}")
            out.append(GaussianTerm(t1.coef * t2.coef * k, poly, a, tuple(c)))
        return SmoothField(tuple(out))

    @property
    def degree(self) -> int:
        return max(t.poly.degree for t in self.terms)

    # -- evaluation -----------------------------------------------------
    def __call__(self, v) -> np.ndarray:
        return self.eval(v)

    def eval(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape[:-1])
        for t in self.terms:
            _, e = t._gauss(v)
            out += t.coef * _eval_poly(t.poly, _powers(v, t.poly.degree)) * e
        return out

    def eval_grad(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape)
        for t in self.terms:
            x, e = t._gauss(v)
            pw = _powers(v, t.poly.degree)
            d1, _, _ = _poly_derivs(t.poly)
            p = _eval_poly(t.poly, pw)
            dp = np.stack([_eval_poly(q, pw) for q in d1], axis=-1)
            out += (t.coef * e)[..., None] * (dp - 2.0 * t.width * x * p[..., None])
        return out

    def eval_hess(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape + (3,))
        eye = np.eye(3)
        for t in self.terms:
            a = t.width
            x, e = t._gauss(v)
            pw = _powers(v, t.poly.degree)
            d1, d2, _ = _poly_derivs(t.poly)
            p = _eval_poly(t.poly, pw)
            dp = np.stack([_eval_poly(q, pw) for q in d1], axis=-1)
            ddp = np.stack([np.stack([_eval_poly(q, pw) for q in row], axis=-1) for row in d2], axis=-2)
            xx = x[..., :, None] * x[..., None, :]
            xdp = x[..., :, None] * dp[..., None, :]
            h = ddp - 2 * a * (xdp + np.swapaxes(xdp, -1, -2)) + p[..., None, None] * (4 * a * a * xx - 2 * a * eye)
            out += (t.coef * e)[..., None, None] * h
        return out

    def eval_third(self, v) -> np.ndarray:
        """Third-derivative tensor ``d^3 f / dv_i dv_j dv_k`` (symmetric)."""
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape + (3, 3))
        eye = np.eye(3)
        for t in self.terms:
            a = t.width
            x, e = t._gauss(v)
            pw = _powers(v, t.poly.degree)
            d1, d2, d3 = _poly_derivs(t.poly)
            p = _eval_poly(t.poly, pw)
            dp = np.stack([_eval_poly(q, pw) for q in d1], axis=-1)
            ddp = np.stack([np.stack([_eval_poly(q, pw) for q in row], axis=-1) for row in d2], axis=-2)
            dddp = np.stack(
                [np.stack([np.stack([_eval_poly(q, pw) for q in r2], axis=-1) for r2 in r1], axis=-2) for r1 in d3],
                axis=-3,
            )
            # derivatives of the Gaussian divided by the Gaussian itself
            g1 = -2 * a * x
            g2 = 4 * a * a * x[..., :, None] * x[..., None, :] - 2 * a * eye
            xxx = x[..., :, None, None] * x[..., None, :, None] * x[..., None, None, :]
            dx = eye[:, :, None] * x[..., None, None, :]
            g3 = -8 * a**3 * xxx + 4 * a * a * (dx + np.moveaxis(dx, -1, -2) + np.moveaxis(dx, -1, -3))
            term = (
                dddp
                + _sym3(dp[..., :, None, None] * g2[..., None, :, :])
                + _sym3(g1[..., :, None, None] * ddp[..., None, :, :])
                + p[..., None, None, None] * g3
            )
            out += (t.coef * e)[..., None, None, None] * term
        return out

    def third_derivative_bound(self, center, radius: float) -> float:
        """Upper bound of the Frobenius norm of the third-derivative tensor on a ball."""
        center = np.asarray(center, dtype=float)
        total = 0.0
        for t in self.terms:
            c = np.asarray(t.center)
            dist = max(0.0, float(np.linalg.norm(center - c)) - radius)
            gauss = math.exp(-t.width * dist * dist)
            # Expand d^3(p e) = e * q with q a polynomial in x = v - c; bound |q| crudely.
            xmax = float(np.linalg.norm(center - c)) + radius
            vmax = float(np.max(np.abs(center))) + radius
            pmax = [sum(abs(cf) * vmax ** sum(ex) for ex, cf in q.coeffs) for q in _flatten_derivs(t.poly)]
            a = t.width
            bound = (
                pmax[3]
                + 3 * pmax[2] * 2 * a * xmax
                + 3 * pmax[1] * (4 * a * a * xmax**2 + 2 * a)
                + pmax[0] * (8 * a**3 * xmax**3 + 12 * a * a * xmax)
            )
            total += abs(t.coef) * gauss * bound * 3 * math.sqrt(3)
        return total

    # -- serialization --------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "terms": [
                {
                    "coef": t.coef,
                    "width": t.width,
                    "center": list(t.center),
                    "poly": [[list(e), c] for e, c in t.poly.coeffs],
                }
                for t in self.terms
            ]
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SmoothField":
        terms = []
        for item in data["terms"]:
            poly = Polynomial.from_dict({tuple(e): c for e, c in item.get("poly", [[[0, 0, 0], 1.0]])})
            terms.append(
                GaussianTerm(
                    float(item.get("coef", 1.0)),
                    poly,
                    float(item.get("width", 0.5)),
                    tuple(item.get("center", (0.0, 0.0, 0.0))),
                )
            )
        return cls(tuple(terms))


def _flatten_derivs(p: Polynomial):
    d1, d2, d3 = _poly_derivs(p)
    # largest coefficient-magnitude representative at each order
    def worst(qs: Iterable[Polynomial]):
        return max(qs, key=lambda q: sum(abs(c) for _, c in q.coeffs), default=Polynomial())

    flat2 = [q for row in d2 for q in row]
    flat3 = [q for r1 in d3 for r2 in r1 for q in r2]
    return [p, worst(d1), worst(flat2), worst(flat3)]


def _sym3(t: np.ndarray) -> np.ndarray:
    """Sum over the three distinct placements of the odd index out."""
    return t + np.moveaxis(t, -3, -2) + np.moveaxis(t, -3, -1)


def _shift_poly(p: Polynomial, offset: np.ndarray) -> Polynomial:
    # p(v - offset) expanded with the binomial theorem
    out: dict[Exponent, float] = {}
    for (i, j, k), c in p.coeffs:
        for a in range(i + 1):
            for b in range(j + 1):
                for d in range(k + 1):
                    coef = (
                        c
                        * math.comb(i, a) * (-offset[0]) ** (i - a)
                        * math.comb(j, b) * (-offset[1]) ** (j - b)
                        * math.comb(k, d) * (-offset[2]) ** (k - d)
                    )
                    out[(a, b, d)] = out.get((a, b, d), 0.0) + coef
    return Polynomial.from_dict(out)


def _term_times_poly(t: GaussianTerm, poly: Polynomial) -> GaussianTerm:
    q = t.poly * poly
    if q.degree > MAX_DEGREE:
        raise CapacityError(f"product degree {q.degree} exceeds cap {MAX_DEGREE}")
    return GaussianTerm(t.coef, q, t.width, t.center)


MU_NORM = (2.0 * math.pi) ** -1.5


def maxwellian() -> SmoothField:
    """The global equilibrium mu(v) = (2 pi)^{-3/2} exp(-|v|^2 / 2)."""
    return SmoothField.gaussian(width=0.5, coef=MU_NORM)


def sqrt_maxwellian() -> SmoothField:
    return SmoothField.gaussian(width=0.25, coef=MU_NORM**0.5)


def multiply_sqrt_mu(field: SmoothField) -> SmoothField:
    """Exact product ``sqrt(mu) * field``; stays inside the family."""
    return field * sqrt_maxwellian()


def maxwellian_times(poly: Polynomial | Mapping) -> SmoothField:
    """``mu * poly`` as a single-term field."""
    if isinstance(poly, Mapping):
        poly = Polynomial.from_dict(poly)
    return SmoothField.gaussian(poly, width=0.5, coef=MU_NORM)


def sqrt_mu_times(poly: Polynomial | Mapping) -> SmoothField:
    if isinstance(poly, Mapping):
        poly = Polynomial.from_dict(poly)
    return SmoothField.gaussian(poly, width=0.25, coef=MU_NORM**0.5)
