"""One test per acceptance criterion; each prints a PASS/FAIL line before asserting."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from boltzlandau import KernelParams, SmoothField
from boltzlandau.boltzmann import cancellation_convolution, cancellation_direct
from boltzlandau.cli import (
    _read_raw,
    main,
    resolve_config,
    study_conserve,
    study_grazing,
    study_identities,
    study_relax,
    study_spectrum,
)
from boltzlandau.grazing import U2_matrix, decompose, u2_term
from boltzlandau.linearized import LinearMode
from boltzlandau.relaxation import integrate, kernel_orthogonal, precompute_tensors

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _config(name, *overrides):
    return resolve_config(_read_raw(CONFIGS / f"{name}.ini"), overrides)


def _failed(rep):
    return [c["name"] for c in rep.checks if not c["passed"]]


def test_criterion_1_identities(acceptance):
    t0 = time.perf_counter()
    rep = study_identities(_config("identities"), 1)
    elapsed = time.perf_counter() - t0
    worst = rep.results["max_relative_error"]
    counts = {}
    for row in rep.rows:
        counts[row[0]] = counts.get(row[0], 0) + 1
    passed = rep.passed and min(counts.values()) >= 20 and elapsed < 10.0
    acceptance(1, passed, f"max rel error {max(worst.values()):.2e} over {min(counts.values())}+ samples "
                          f"per quantity, {elapsed:.1f} s")
    assert passed, _failed(rep)


def test_criterion_2_cancellation_routes(acceptance):
    pairs = [
        (SmoothField.gaussian({(0, 0, 0): 1.0, (1, 0, 0): 0.3}, width=0.6, center=(0.3, 0.0, -0.2)),
         SmoothField.gaussian({(0, 0, 0): 1.0, (0, 1, 1): 0.2}, width=0.4, center=(-0.2, 0.1, 0.0))),
        (SmoothField.gaussian(width=0.5), SmoothField.gaussian(width=0.5)),
        (SmoothField.gaussian({(0, 0, 0): 1.0, (2, 0, 0): 0.5}, width=1.0, center=(1.0, 0.0, 0.0)),
         SmoothField.gaussian({(0, 0, 0): 1.0, (0, 0, 1): -0.4}, width=0.3, center=(0.0, -0.5, 0.5))),
    ]
    triples = [KernelParams(0.3, 0.0, 1.0), KernelParams(0.6, -1.5, 0.7), KernelParams(0.9, -2.5, 0.5)]
    t0 = time.perf_counter()
    errs = []
    for p in triples:
        for g, h in pairs:
            direct = cancellation_direct(p, g, h)
            errs.append(abs(cancellation_convolution(p, g, h) - direct) / abs(direct))
    elapsed = time.perf_counter() - t0
    passed = max(errs) <= 1e-4 and elapsed < 120.0
    acceptance(2, passed, f"max rel difference {max(errs):.2e} over {len(errs)} cases, {elapsed:.1f} s")
    assert passed


def test_criterion_3_conservation_equilibrium(acceptance):
    t0 = time.perf_counter()
    rep = study_conserve(_config("conserve"), 1)
    elapsed = time.perf_counter() - t0
    n_points = sum(1 for r in rep.rows if r[1] == "Q(mu,mu)") // 2
    worst = max(c["value"] for c in rep.checks if "/scale" in c["name"])
    sup = max(c["value"] for c in rep.checks if c["name"].startswith("sup"))
    passed = rep.passed and n_points >= 10 and elapsed < 300.0
    acceptance(3, passed, f"max |<Q,phi>|/scale {worst:.1e}, sup |Q(mu,mu)| {sup:.1e} at {n_points} points, "
                          f"{elapsed:.0f} s")
    assert passed, _failed(rep)


def test_criterion_4_grazing_rate(acceptance):
    t0 = time.perf_counter()
    rep = study_grazing(_config("grazing"), 8)
    elapsed = time.perf_counter() - t0
    rr = rep.results["rate_reports"]
    detail = ", ".join(f"gamma={g}: slope {r['fitted_slope']:.3f} residual {r['fit_residual']:.3f}"
                       for g, r in rr.items())
    passed = rep.passed and set(rr) == {"0.0", "-2.0"} and elapsed < 1800.0
    acceptance(4, passed, f"{detail}, {elapsed:.0f} s")
    assert passed, _failed(rep)


def test_criterion_5_telescoping_and_u2(acceptance):
    g = SmoothField.gaussian({(0, 0, 0): 1.0, (1, 0, 0): 0.3}, width=0.6, center=(0.3, 0.0, -0.2))
    h = SmoothField.gaussian({(0, 0, 0): 1.0, (0, 1, 1): 0.2}, width=0.4, center=(-0.2, 0.1, 0.0))
    points = [np.array([1.0, -0.5, 0.7]), np.zeros(3), np.array([-0.5, 0.5, 0.2])]
    exact = True
    for gamma in (0.0, -2.0):
        for s in (0.75, 0.875, 0.9375, 0.96875):
            for v in points:
                d = decompose(KernelParams(s, gamma), g, h, v)
                exact &= d.exact and math.fsum((d.leading, d.u2_term, d.remainder)) == d.total
    s_list = [0.9, 0.95, 0.975]
    ratio = [u2_term(KernelParams(s, 0.0), g, h, points[0]) / (1 - s) for s in s_list]
    changes = [abs(b / a - 1) for a, b in zip(ratio[:-1], ratio[1:])]
    spread = max(ratio) / min(ratio) - 1
    stable = changes[-1] <= 0.05 and changes[-1] < changes[0]
    rng = np.random.default_rng(1)
    trace = 0.0
    for _ in range(50):
        U = U2_matrix(rng.uniform(0.05, 0.95), rng.uniform(-4.0, 0.0), rng.normal(size=3) * 2)
        trace = max(trace, abs(np.trace(U)) / np.abs(U).max())
    passed = exact and stable and trace <= 1e-14
    acceptance(5, passed, f"telescoping exact={exact}, u2/(1-s) successive changes "
                          f"{', '.join(f'{c:.1%}' for c in changes)} (spread {spread:.1%}), "
                          f"U2 trace/max {trace:.1e}")
    assert passed


def test_criterion_6_spectrum(acceptance):
    t0 = time.perf_counter()
    rep = study_spectrum(_config("spectrum"), 8)
    elapsed = time.perf_counter() - t0
    res = rep.results
    passed = rep.passed and res["spectrum"]["kernel_count"] == 5 and elapsed < 1200.0
    acceptance(6, passed, f"kernel count {res['spectrum']['kernel_count']}, gap {res['spectrum']['gap']:.5f}, "
                          f"oracle rel diff {res['oracle']['relative_difference']:.1e}, "
                          f"gap/moment lower constant {res['gap_scaling']['lower_constant']:.3f}, {elapsed:.0f} s")
    assert passed, _failed(rep)


def test_criterion_7_relaxation(acceptance):
    t0 = time.perf_counter()
    cfg = _config("relax")
    rep = study_relax(cfg, 8)
    tl = precompute_tensors(LinearMode.landau(0.0))
    c0 = kernel_orthogonal(np.random.default_rng(cfg["study"]["seed"]).standard_normal(tl.basis.size))
    c0 *= cfg["relax"]["amplitude"] / np.linalg.norm(c0)
    t_end = 1.0 / tl.gap
    ref = integrate(None, c0, t_end, t_end / 800, tl).coeffs[-1]
    err = [np.linalg.norm(integrate(None, c0, t_end, t_end / n, tl).coeffs[-1] - ref) for n in (25, 50)]
    order = math.log2(err[0] / err[1])
    elapsed = time.perf_counter() - t0
    res = rep.results
    passed = rep.passed and order >= 3.7 and elapsed < 1800.0
    acceptance(7, passed, f"drift {res['max_drift']:.1e}, decay ratio {res['decay_ratio']:.6f}, "
                          f"RK4 order {order:.2f}, trajectory slope {res['fitted_slope']:.3f}, {elapsed:.0f} s")
    assert passed, _failed(rep)


@pytest.mark.parametrize("study", ["identities", "conserve", "grazing", "relax"])
def test_criterion_8_reproducible(study, tmp_path, acceptance):
    runs = {}
    for label, workers in (("serial", "1"), ("serial-again", "1"), ("parallel", "2")):
        out = tmp_path / label
        code = main(["run", str(CONFIGS / f"{study}.ini"), "--out", str(out), "--workers", workers])
        runs[label] = (code, (out / "data.csv").read_bytes(), (out / "report.json").read_bytes())
    same_csv = len({r[1] for r in runs.values()}) == 1
    same_json = len({r[2] for r in runs.values()}) == 1
    passed = same_csv and same_json and all(r[0] == 0 for r in runs.values())
    acceptance(8, passed, f"{study}: data.csv identical={same_csv}, report.json identical={same_json} "
                          f"across --workers 1, 1, 2")
    assert passed
