"""Space-homogeneous relaxation in Galerkin coordinates.

The perturbation ``f = sum_i c_i phi_i`` of ``F = mu + sqrt(mu) f`` evolves by

    c_k' = -sum_j M_kj c_j + sum_ij T_ijk c_i c_j,

with ``M`` the symmetrized linearized matrix and ``T_ijk = <Gamma(phi_i, phi_j), phi_k>``
symmetrized in ``(i, j)``.  Time stepping is classical fourth-order Runge-Kutta.
"""

from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .boltzmann import EvalConfig
from .linearized import GalerkinBasis, LinearMode, build_galerkin_basis, galerkin_arrays, spectrum_report
from .parallel import ordered_map

N_KERNEL = 5


class NumericalAbort(RuntimeError):
    """The integration was stopped because the perturbation norm blew up."""


class InitialDataError(ValueError):
    """The initial perturbation violates ``mu + sqrt(mu) f >= 0`` on the sample grid."""


@dataclass
class RelaxTensors:
    mode: LinearMode
    basis: GalerkinBasis
    L_matrix: np.ndarray
    Gamma_tensor: np.ndarray
    gap: float

    def rhs(self, c: np.ndarray) -> np.ndarray:
        return -self.L_matrix @ c + np.einsum("ijk,i,j->k", self.Gamma_tensor, c, c)

    def linear_only(self) -> "RelaxTensors":
        return RelaxTensors(self.mode, self.basis, self.L_matrix, np.zeros_like(self.Gamma_tensor), self.gap)

    def scaled_nonlinearity(self, factor: float) -> "RelaxTensors":
        return RelaxTensors(self.mode, self.basis, self.L_matrix, factor * self.Gamma_tensor, self.gap)


@functools.lru_cache(maxsize=32)
def _cached_tensors(mode: LinearMode, degree: int, pair):
    basis = build_galerkin_basis(degree)
    cfg = EvalConfig(pair=pair)
    M_raw, T = galerkin_arrays(mode, basis, cfg, with_tensor=True)
    M, rep = spectrum_report(M_raw, mode)
    T = 0.5 * (T + T.transpose(1, 0, 2))
    return RelaxTensors(mode, basis, M, T, rep.gap)


def precompute_tensors(mode: LinearMode, basis: GalerkinBasis | None = None,
                       cfg: EvalConfig | None = None) -> RelaxTensors:
    """Linearized matrix and quadratic tensor by exact weak-form quadrature (cached)."""
    cfg = cfg or EvalConfig()
    degree = basis.degree if basis is not None else 4
    return _cached_tensors(mode, degree, cfg.pair)


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


def positivity_grid(radius: float = 4.0, n: int = 9) -> np.ndarray:
    """Points of a uniform cubic grid inside the ball ``|v| <= radius``."""
    x = np.linspace(-radius, radius, n)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
    return pts[np.linalg.norm(pts, axis=1) <= radius + 1e-12]


@dataclass
class RelaxTrace:
    """Sampled trajectory with monitors.

    ``min_density`` is ``min mu + sqrt(mu) f`` over :func:`positivity_grid`.
    """

    times: np.ndarray
    coeffs: np.ndarray
    norm: np.ndarray
    drift: np.ndarray
    min_density: np.ndarray
    monotone_after_transient: bool = True
    notes: list = field(default_factory=list)

    @property
    def max_drift(self) -> float:
        return float(self.drift.max())

    @property
    def positivity_violated(self) -> bool:
        return bool(np.any(self.min_density < 0.0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.coeffs.shape[1]
        w.writerow(["t"] + [f"c{i}" for i in range(n)] + ["norm", "drift", "min_density"])
        for k in range(len(self.times)):
            w.writerow([f"{self.times[k]:.10e}"] + [f"{x:.10e}" for x in self.coeffs[k]]
                       + [f"{self.norm[k]:.10e}", f"{self.drift[k]:.10e}", f"{self.min_density[k]:.10e}"])
        return buf.getvalue()


def _density_min(basis: GalerkinBasis, c: np.ndarray, grid_poly: np.ndarray, grid_mu: np.ndarray) -> float:
    return float(np.min(grid_mu * (1.0 + grid_poly @ c)))


def kernel_orthogonal(c0) -> np.ndarray:
    """Remove the macroscopic part: zero the five invariant coordinates."""
    c = np.array(c0, dtype=float)
    c[:N_KERNEL] = 0.0
    return c


def integrate(mode: LinearMode | None, f0_coeffs, t_end: float, dt: float | None = None,
              tensors: RelaxTensors | None = None, sample_every: int = 1, enforce_orthogonal: bool = True,
              transient: float = 0.1) -> RelaxTrace:
    """RK4 integration of the Galerkin system from ``f0_coeffs``.

    Parameters
    ----------
    mode, tensors :
        Either the operator mode (tensors are then precomputed) or the tensors.
    dt :
        Step; default ``1e-2 / gap``.
    enforce_orthogonal :
        Drop the macroscopic part of ``f0`` before integrating.
    transient :
        Fraction of ``t_end`` excluded from the monotone-decay check.
    """
    if tensors is None:
        tensors = precompute_tensors(mode)
    basis = tensors.basis
    c = kernel_orthogonal(f0_coeffs) if enforce_orthogonal else np.array(f0_coeffs, dtype=float)
    grid = positivity_grid()
    grid_poly = basis.poly_values(grid)
    grid_mu = (2 * math.pi) ** -1.5 * np.exp(-0.5 * np.sum(grid**2, axis=1))
    if _density_min(basis, c, grid_poly, grid_mu) < 0.0:
        raise InitialDataError("mu + sqrt(mu) f0 is negative on the sample grid")
    if dt is None:
        dt = 1e-2 / tensors.gap
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    h = t_end / n_steps
    c0 = c.copy()
    norm0 = float(np.linalg.norm(c0))
    times, coeffs = [0.0], [c.copy()]
    for k in range(1, n_steps + 1):
        k1 = tensors.rhs(c)
        k2 = tensors.rhs(c + 0.5 * h * k1)
        k3 = tensors.rhs(c + 0.5 * h * k2)
        k4 = tensors.rhs(c + h * k3)
        c = c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        nrm = float(np.linalg.norm(c))
        if not np.isfinite(nrm) or (norm0 > 0 and nrm > 10.0 * norm0):
            raise NumericalAbort(f"perturbation norm grew from {norm0:.3e} to {nrm:.3e} at t={k * h:.4g}"
                                 f" (dt={h:.3e}); reduce the step")
        if k % sample_every == 0 or k == n_steps:
            times.append(k * h)
            coeffs.append(c.copy())
    coeffs = np.array(coeffs)
    times = np.array(times)
    norm = np.linalg.norm(coeffs, axis=1)
    drift = np.abs(coeffs[:, :N_KERNEL] - c0[:N_KERNEL]).max(axis=1)
    dens = np.array([_density_min(basis, x, grid_poly, grid_mu) for x in coeffs])
    late = norm[times >= transient * t_end]
    mono = bool(np.all(np.diff(late) <= 1e-14 * max(norm0, 1e-300)))
    trace = RelaxTrace(times, coeffs, norm, drift, dens, mono)
    if trace.positivity_violated:
        trace.notes.append("mu + sqrt(mu) f became negative on the sample grid")
    return trace


def decay_rate(trace: RelaxTrace, t_window: float) -> float:
    """Least-squares rate of ``log |c(t)|`` on ``[0, t_window]``."""
    sel = trace.times <= t_window + 1e-12
    t = trace.times[sel]
    y = np.log(trace.norm[sel])
    A = np.stack([t, np.ones_like(t)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(-coef[0])


def lyapunov_radius(tensors: RelaxTensors) -> float:
    """Radius ``gap / (2 |T|)`` inside which ``d/dt |c|^2 <= 0`` (Frobenius bound on ``T``)."""
    return tensors.gap / (2.0 * float(np.linalg.norm(tensors.Gamma_tensor)))


def energy_derivative(tensors: RelaxTensors, c: np.ndarray) -> float:
    """``d/dt |c|^2 = -2 <Mc, c> + 2 <T(c, c), c>``."""
    return float(2.0 * tensors.rhs(c) @ c)


# ---------------------------------------------------------------------------
# Boltzmann against Landau
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryComparison:
    s: float
    times: np.ndarray
    difference: np.ndarray

    @property
    def sup(self) -> float:
        return float(self.difference.max())


def compare_trajectories(gamma: float, s: float, f0, t_end: float, dt: float,
                         cfg: EvalConfig | None = None, degree: int = 4) -> TrajectoryComparison:
    """``|c_B(t) - c_L(t)|`` along a shared grid of sample times."""
    cfg = cfg or EvalConfig()
    basis = build_galerkin_basis(degree)
    tl = precompute_tensors(LinearMode.landau(gamma), basis, cfg)
    tb = tl if s == 1.0 else precompute_tensors(LinearMode.boltzmann(s, gamma), basis, cfg)
    a = integrate(None, f0, t_end, dt, tb)
    b = integrate(None, f0, t_end, dt, tl)
    return TrajectoryComparison(s, a.times, np.linalg.norm(a.coeffs - b.coeffs, axis=1))


def _compare_cell(args):
    return compare_trajectories(*args)


def trajectory_sweep(gamma: float, s_list, f0, t_end: float, dt: float, cfg: EvalConfig | None = None,
                     workers: int = 1):
    """Comparisons for every ``s`` (one trajectory pair per worker, input order kept)."""
    cfg = cfg or EvalConfig()
    return ordered_map(_compare_cell, [(gamma, float(s), f0, t_end, dt, cfg) for s in s_list], workers)


def scaled_data_comparison(tensors: RelaxTensors, f0, s: float, t_end: float, dt: float):
    """Scaled-data convention against the linearized flow.

    Integrates from ``(1-s) f0``, rescales by ``1/(1-s)`` and returns
    ``(sup_t |rescaled - linear|, sup_t |rescaled - unscaled|)`` where
    ``linear`` is the flow without the quadratic term.
    """
    eps = 1.0 - s
    scaled = integrate(None, eps * np.asarray(f0, dtype=float), t_end, dt, tensors)
    linear = integrate(None, f0, t_end, dt, tensors.linear_only())
    full = integrate(None, f0, t_end, dt, tensors)
    rescaled = scaled.coeffs / eps
    return (float(np.linalg.norm(rescaled - linear.coeffs, axis=1).max()),
            float(np.linalg.norm(rescaled - full.coeffs, axis=1).max()))
