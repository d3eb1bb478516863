"""Command-line driver: ``boltzlandau run <config> [--set sec.key=value] [--workers N] [--out DIR] [--seed N]``.

A config is an INI file (or a JSON object with the same sections).  Every run
writes ``config.resolved`` (all keys, defaults included), ``data.csv`` and
``report.json`` into the output directory.

Exit codes: 0 success, 1 config error, 2 tolerance failure, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .boltzmann import EvalConfig, ToleranceError, estimate_Q, weak_Q
from .fields import Polynomial, SmoothField, maxwellian
from .grazing import convergence_study, fit_loglog
from .kernel import (
    KernelParams,
    ParameterError,
    angular_symbol_A,
    angular_symbol_A_quadrature,
    change_of_var_alpha,
    change_of_var_geometric,
    change_of_var_psi,
    momentum_transfer_moment,
    momentum_transfer_quadrature,
    sin4_moment,
    sin4_quadrature,
)
from .landau import estimate_QL, weak_QL
from .linearized import LinearMode, assemble_L_matrix, build_galerkin_basis, gap_oracle
from .parallel import default_workers, ordered_map
from .relaxation import NumericalAbort, decay_rate, integrate, kernel_orthogonal, precompute_tensors, trajectory_sweep

STUDY_KINDS = ("eval", "conserve", "grazing", "spectrum", "relax", "identities")
CSV_CONTRACT_VERSION = 1


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]


def _point_list(text):
    if isinstance(text, (list, tuple)):
        pts = [[float(c) for c in p] for p in text]
    else:
        pts = [[float(c) for c in chunk.split(",")] for chunk in str(text).split(";") if chunk.strip()]
    if any(len(p) != 3 for p in pts):
        raise ConfigError("points must have three coordinates")
    return pts


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _str(text):
    return str(text).strip()


SCHEMA = {
    "study": {"kind": (_str, None), "seed": (int, 0)},
    "kernel": {"s": (float, 0.5), "gamma": (float, -2.0), "eta": (float, 1.0)},
    "fields": {
        "g": (_str, "gaussian width=0.6 center=0.3,0,-0.2 poly=000:1;100:0.3"),
        "h": (_str, "gaussian width=0.4 center=-0.2,0.1,0 poly=000:1;011:0.2"),
    },
    "quadrature": {
        "mode": (_str, "compensated"),
        "cutoff_shape": (_str, "exp"),
        "n_first": (int, 10),
        "n_panel": (int, 8),
        "panel_width": (float, 1.0),
        "r_max": (float, 8.0),
        "n_polar": (int, 10),
        "n_azimuth": (int, 20),
        "n_w": (int, 8),
        "n_phi": (int, 10),
        "tol": (float, 1e-6),
        "strict": (_bool, False),
    },
    "sweep": {
        "s_list": (_float_list, [0.75, 0.875, 0.9375, 0.96875]),
        "gamma_list": (_float_list, [0.0, -2.0]),
        "points": (_point_list, [[1.0, -0.5, 0.7], [0.0, 0.0, 0.0], [-0.5, 0.5, 0.2]]),
        "n_random_points": (int, 0),
        "random_radius": (float, 1.5),
    },
    "spectrum": {
        "degree": (int, 4),
        "gap_s_list": (_float_list, [0.3, 0.5, 0.7, 0.9]),
        "oracle": (_bool, True),
    },
    "relax": {
        "s_list": (_float_list, [0.75, 0.875, 0.9375]),
        "amplitude": (float, 0.02),
        "t_end_gaps": (float, 5.0),
        "dt_gaps": (float, 0.01),
    },
    "thresholds": {
        "slope_min": (float, 0.9),
        "residual_max": (float, 0.1),
        "identity_rtol": (float, 1e-8),
        "conservation_rtol": (float, 1e-6),
        "equilibrium_factor": (float, 10.0),
        "oracle_rtol": (float, 0.01),
        "drift_max": (float, 1e-8),
        "decay_rtol": (float, 0.1),
    },
    "output": {"dir": (_str, "out")},
}


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        if v and isinstance(v[0], list):
            return "; ".join(",".join(repr(float(c)) for c in p) for p in v)
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def _read_raw(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigError("JSON config must map section names to objects")
        return {sec: dict(vals) for sec, vals in data.items()}
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"invalid config syntax: {exc}") from exc
    return {sec: dict(parser[sec]) for sec in parser.sections()}


def resolve_config(raw: dict, overrides=()) -> dict:
    """Validate against the schema, apply ``section.key=value`` overrides and fill defaults."""
    raw = {sec: dict(vals) for sec, vals in raw.items()}
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        sec, name = key.strip().split(".", 1)
        raw.setdefault(sec, {})[name] = value
    out = {}
    for sec, vals in raw.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]; valid sections: {', '.join(SCHEMA)}")
        for name in vals:
            if name not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{name}; valid keys: {', '.join(SCHEMA[sec])}")
    for sec, keys in SCHEMA.items():
        out[sec] = {}
        for name, (conv, default) in keys.items():
            if name in raw.get(sec, {}):
                try:
                    out[sec][name] = conv(raw[sec][name])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad value for {sec}.{name}: {raw[sec][name]!r} ({exc})") from exc
            else:
                out[sec][name] = default
    kind = out["study"]["kind"]
    if kind not in STUDY_KINDS:
        raise ConfigError(f"unknown study kind {kind!r}; valid kinds: {', '.join(STUDY_KINDS)}")
    return out


def render_resolved(cfg: dict) -> str:
    lines = []
    for sec, keys in SCHEMA.items():
        lines.append(f"[{sec}]")
        for name in keys:
            lines.append(f"{name} = {_format_value(cfg[sec][name])}")
        lines.append("")
    return "\n".join(lines)


def parse_field(text: str) -> SmoothField:
    """``maxwellian``, a JSON field object, or terms like ``gaussian width=0.5 center=x,y,z coef=1 poly=000:1;110:0.3``.

    Several compact terms may be joined with ``+``.
    """
    text = text.strip()
    if text == "maxwellian":
        return maxwellian()
    if text.startswith("{"):
        try:
            return SmoothField.from_dict(json.loads(text))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad field JSON: {exc}") from exc
    terms = []
    for chunk in text.split("+"):
        parts = chunk.split()
        if not parts or parts[0] != "gaussian":
            raise ConfigError(f"field term must start with 'gaussian': {chunk!r}")
        opts = {"width": 0.5, "center": (0.0, 0.0, 0.0), "coef": 1.0, "poly": {(0, 0, 0): 1.0}}
        for p in parts[1:]:
            if "=" not in p:
                raise ConfigError(f"bad field option {p!r}")
            k, v = p.split("=", 1)
            try:
                if k in ("width", "coef"):
                    opts[k] = float(v)
                elif k == "center":
                    opts[k] = tuple(float(c) for c in v.split(","))
                    if len(opts[k]) != 3:
                        raise ValueError("center needs three coordinates")
                elif k == "poly":
                    poly = {}
                    for mono in v.split(";"):
                        e, c = mono.split(":")
                        poly[tuple(int(ch) for ch in e)] = float(c)
                    opts[k] = poly
                else:
                    raise ValueError(f"unknown option {k}")
            except ValueError as exc:
                raise ConfigError(f"bad field option {p!r}: {exc}") from exc
        terms.extend(SmoothField.gaussian(Polynomial.from_dict(opts["poly"]), opts["width"], opts["center"],
                                          opts["coef"]).terms)
    return SmoothField(tuple(terms))


def eval_config(cfg: dict) -> EvalConfig:
    q = cfg["quadrature"]
    try:
        return EvalConfig(n_first=q["n_first"], n_panel=q["n_panel"], panel_width=q["panel_width"],
                          r_max=q["r_max"], n_polar=q["n_polar"], n_azimuth=q["n_azimuth"], n_w=q["n_w"],
                          n_phi=q["n_phi"], tol=q["tol"], mode=q["mode"], cutoff_shape=q["cutoff_shape"],
                          strict=q["strict"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def sample_points(cfg: dict) -> list:
    pts = [list(p) for p in cfg["sweep"]["points"]]
    n = cfg["sweep"]["n_random_points"]
    if n:
        rng = np.random.default_rng(cfg["study"]["seed"])
        R = cfg["sweep"]["random_radius"]
        pts.extend(rng.uniform(-R, R, size=(n, 3)).tolist())
    return pts


# ---------------------------------------------------------------------------
# Report helpers
# ---------------------------------------------------------------------------


class Report:
    def __init__(self, kind: str, columns):
        self.kind = kind
        self.columns = list(columns)
        self.rows = []
        self.checks = []
        self.results = {}

    def row(self, *values):
        self.rows.append(values)

    def check(self, name, value, threshold, passed, error_estimate=None, relation="<="):
        self.checks.append({"name": name, "value": _num(value), "threshold": _num(threshold),
                            "relation": relation, "passed": bool(passed),
                            "error_estimate": "exact" if error_estimate is None else _num(error_estimate)})

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_cell(x) for x in r])
        return buf.getvalue()

    def to_dict(self):
        return {
            "study": self.kind,
            "version": __version__,
            "csv_contract": {"version": CSV_CONTRACT_VERSION, "columns": self.columns},
            "passed": self.passed,
            "checks": self.checks,
            "results": _jsonable(self.results),
        }


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def study_identities(cfg, workers):
    rep = Report("identities", ["quantity", "s", "parameter", "closed_form", "oracle", "rel_error"])
    rng = np.random.default_rng(cfg["study"]["seed"])
    tol = cfg["thresholds"]["identity_rtol"]
    s_vals = np.sort(rng.uniform(0.02, 0.98, 20))
    worst = {}

    def record(name, s, par, closed, oracle):
        e = _rel(closed, oracle)
        worst[name] = max(worst.get(name, 0.0), e)
        rep.row(name, float(s), float(par), float(closed), float(oracle), e)

    for s in s_vals:
        record("momentum_transfer_moment", s, 0.0, momentum_transfer_moment(s), momentum_transfer_quadrature(s))
        record("sin4_moment", s, 0.0, sin4_moment(s), sin4_quadrature(s))
        x_low = rng.uniform(0.2, math.sqrt(2.0))
        x_high = rng.uniform(1.6, 6.0)
        record("angular_symbol_A_low", s, x_low, angular_symbol_A(s, x_low), angular_symbol_A_quadrature(s, x_low))
        record("angular_symbol_A_high", s, x_high, angular_symbol_A(s, x_high),
               angular_symbol_A_quadrature(s, x_high))
    for _ in range(20):
        kappa, iota = rng.uniform(0.0, 1.0, 2)
        theta = rng.uniform(0.05, 0.5 * math.pi)
        psi, alpha = change_of_var_geometric(kappa, iota, theta)
        record("psi", kappa + iota, theta, change_of_var_psi(kappa + iota, theta), psi)
        record("alpha", kappa + iota, theta, change_of_var_alpha(kappa + iota, theta), alpha)
    for name, e in worst.items():
        rep.check(f"{name} max relative error", e, tol, e <= tol)
    rep.results = {"max_relative_error": worst, "samples": len(s_vals)}
    return rep


def study_eval(cfg, workers):
    params = KernelParams(cfg["kernel"]["s"], cfg["kernel"]["gamma"], cfg["kernel"]["eta"])
    g, h = parse_field(cfg["fields"]["g"]), parse_field(cfg["fields"]["h"])
    ec = eval_config(cfg)
    pts = sample_points(cfg)
    rep = Report("eval", ["x", "y", "z", "Q_B", "Q_B_error", "Q_L", "Q_L_error"])
    res = ordered_map(_eval_cell, [(params, g, h, p, ec) for p in pts], workers)
    for p, (qb, eb, ql, el) in zip(pts, res):
        rep.row(*p, qb, eb, ql, el)
        rep.check(f"Q_B error estimate at {p}", eb, ec.tol, eb <= ec.tol, eb)
        rep.check(f"Q_L error estimate at {p}", el, ec.tol, el <= ec.tol, el)
    return rep


def _eval_cell(args):
    params, g, h, p, ec = args
    qb, eb = estimate_Q(params, g, h, p, ec)
    ql, el = estimate_QL(params.gamma, g, h, p, ec)
    return qb, eb, ql, el


TEST_FUNCTIONS = {
    "1": {(0, 0, 0): 1.0},
    "v1": {(1, 0, 0): 1.0},
    "v2": {(0, 1, 0): 1.0},
    "v3": {(0, 0, 1): 1.0},
    "|v|^2": {(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0},
}


def study_conserve(cfg, workers):
    params = KernelParams(cfg["kernel"]["s"], cfg["kernel"]["gamma"], cfg["kernel"]["eta"])
    g = parse_field(cfg["fields"]["g"])
    ec = eval_config(cfg)
    thr = cfg["thresholds"]
    rep = Report("conserve", ["operator", "quantity", "x", "y", "z", "value", "scale", "error_estimate"])
    for name, phi in TEST_FUNCTIONS.items():
        vb, sb = weak_Q(params, g, g, Polynomial.from_dict(phi), ec, return_scale=True)
        vl, sl = weak_QL(params.gamma, g, g, Polynomial.from_dict(phi), ec, return_scale=True)
        rep.row("boltzmann", f"<Q(g,g),{name}>", "", "", "", vb, sb, "exact-rule")
        rep.row("landau", f"<Q(g,g),{name}>", "", "", "", vl, sl, "exact-rule")
        rep.check(f"Boltzmann <Q(g,g),{name}>/scale", abs(vb) / sb if sb else 0.0, thr["conservation_rtol"],
                  abs(vb) <= thr["conservation_rtol"] * sb)
        rep.check(f"Landau <Q(g,g),{name}>/scale", abs(vl) / sl if sl else 0.0, thr["conservation_rtol"],
                  abs(vl) <= thr["conservation_rtol"] * sl)
    pts = sample_points(cfg)
    rng = np.random.default_rng(cfg["study"]["seed"])
    while len(pts) < 10:
        pts.append(rng.uniform(-2.0, 2.0, 3).tolist())
    mu = maxwellian()
    res = ordered_map(_eval_cell, [(params, mu, mu, p, ec) for p in pts], workers)
    bound = thr["equilibrium_factor"] * ec.tol
    sup_b = max(abs(r[0]) for r in res)
    sup_l = max(abs(r[2]) for r in res)
    for p, (qb, eb, ql, el) in zip(pts, res):
        rep.row("boltzmann", "Q(mu,mu)", *p, qb, "", eb)
        rep.row("landau", "Q(mu,mu)", *p, ql, "", el)
    rep.check("sup |Q_B(mu,mu)|", sup_b, bound, sup_b <= bound, max(r[1] for r in res))
    rep.check("sup |Q_L(mu,mu)|", sup_l, bound, sup_l <= bound, max(r[3] for r in res))
    return rep


def study_grazing(cfg, workers):
    g, h = parse_field(cfg["fields"]["g"]), parse_field(cfg["fields"]["h"])
    ec = eval_config(cfg)
    thr = cfg["thresholds"]
    pts = [np.asarray(p) for p in sample_points(cfg)]
    rep = Report("grazing", ["gamma", "s", "one_minus_s", "sup_error", "error_estimate", "leading", "u2_term",
                             "remainder"])
    reports = {}
    for gamma in cfg["sweep"]["gamma_list"]:
        r = convergence_study(gamma, g, h, pts, cfg["sweep"]["s_list"], ec, workers=workers,
                              eta=cfg["kernel"]["eta"])
        reports[repr(gamma)] = r.to_dict()
        for i, s in enumerate(r.s_values):
            rep.row(gamma, s, 1.0 - s, r.errors[i], r.error_estimates[i], r.leading[i], r.u2[i], r.remainder[i])
        rep.check(f"gamma={gamma} fitted slope", r.fitted_slope, thr["slope_min"],
                  r.fitted_slope >= thr["slope_min"], None, ">=")
        rep.check(f"gamma={gamma} fit residual", r.fit_residual, thr["residual_max"],
                  r.fit_residual <= thr["residual_max"])
        rep.check(f"gamma={gamma} resolved above quadrature error", float(not r.degenerate), 1.0, not r.degenerate,
                  max(r.error_estimates), ">=")
    rep.results = {"rate_reports": reports}
    return rep


def _spectrum_cell(args):
    s, gamma, eta, degree = args
    basis = build_galerkin_basis(degree)
    _, report = assemble_L_matrix(LinearMode.boltzmann(s, gamma, eta), basis)
    return report


def study_spectrum(cfg, workers):
    k = cfg["kernel"]
    thr = cfg["thresholds"]
    degree = cfg["spectrum"]["degree"]
    basis = build_galerkin_basis(degree)
    mode = LinearMode.boltzmann(k["s"], k["gamma"], k["eta"])
    _, report = assemble_L_matrix(mode, basis)
    rep = Report("spectrum", ["label", "s", "index", "eigenvalue"])
    for i, ev in enumerate(report.eigenvalues):
        rep.row("main", k["s"], i, ev)
    rep.check("kernel eigenvalue count", report.kernel_count, 5, report.kernel_count == 5, None, "==")
    non_kernel = sorted(report.eigenvalues, key=abs)[report.kernel_count:]
    rep.check("remaining eigenvalues positive", min(non_kernel), 0.0, min(non_kernel) > 0.0, None, ">")
    results = {"spectrum": report.to_dict()}
    if cfg["spectrum"]["oracle"]:
        value, label, quotients = gap_oracle(mode, degree=degree)
        err = _rel(report.gap, value)
        tag = f"oracle relative difference (mode {label})"
        if k["gamma"] == 0.0:
            rep.check(tag, err, thr["oracle_rtol"], err <= thr["oracle_rtol"])
        results["oracle"] = {"value": value, "mode": list(label),
                             "quotients": {f"{a},{b}": q for (a, b), q in quotients.items()},
                             "relative_difference": err, "exact_for_gamma_zero_only": True}
    s_list = cfg["spectrum"]["gap_s_list"]
    reps = ordered_map(_spectrum_cell, [(s, k["gamma"], k["eta"], degree) for s in s_list], workers)
    ratios = [r.gap / momentum_transfer_moment(s) for s, r in zip(s_list, reps)]
    for s, r in zip(s_list, reps):
        rep.row("gap", s, r.kernel_count, r.gap)
    c_low = min(ratios)
    rep.check("gap / momentum_transfer_moment lower constant", c_low, 0.0, c_low > 0.0, None, ">")
    results["gap_scaling"] = {"s": s_list, "gap": [r.gap for r in reps], "ratio": ratios, "lower_constant": c_low}
    rep.results = results
    return rep


def study_relax(cfg, workers):
    k = cfg["kernel"]
    thr = cfg["thresholds"]
    rc = cfg["relax"]
    gamma = k["gamma"]
    tl = precompute_tensors(LinearMode.landau(gamma))
    rng = np.random.default_rng(cfg["study"]["seed"])
    c0 = kernel_orthogonal(rng.standard_normal(tl.basis.size))
    c0 *= rc["amplitude"] / np.linalg.norm(c0)
    t_end = rc["t_end_gaps"] / tl.gap
    dt = rc["dt_gaps"] / tl.gap
    rep = Report("relax", ["s", "t", "difference"])
    zero = integrate(None, np.zeros(tl.basis.size), t_end, dt, tl)
    rep.check("zero data stays zero", float(np.abs(zero.coeffs).max()), 0.0, np.all(zero.coeffs == 0.0), None, "==")
    trace = integrate(None, c0, t_end, dt, tl)
    rep.check("Landau kernel-coefficient drift", trace.max_drift, thr["drift_max"], trace.max_drift <= thr["drift_max"])
    w, V = np.linalg.eigh(tl.L_matrix)
    lin = integrate(None, 1e-3 * V[:, int(np.argmin(np.abs(w - tl.gap)))], 1.0 / tl.gap, dt, tl)
    ratio = decay_rate(lin, 1.0 / tl.gap) / tl.gap
    rep.check("linear decay rate / gap - 1", abs(ratio - 1.0), thr["decay_rtol"], abs(ratio - 1.0) <= thr["decay_rtol"])
    comps = trajectory_sweep(gamma, rc["s_list"], c0, t_end, dt, workers=workers)
    for c in comps:
        for t, d in zip(c.times, c.difference):
            rep.row(c.s, t, d)
    sups = [c.sup for c in comps]
    oms = [1.0 - c.s for c in comps]
    slope, resid, const = fit_loglog(oms, sups)
    rep.check("trajectory difference slope", slope, thr["slope_min"], slope >= thr["slope_min"], None, ">=")
    rep.results = {"gap": tl.gap, "t_end": t_end, "dt": dt, "sup_difference": dict(zip(rc["s_list"], sups)),
                   "fitted_slope": slope, "fit_residual": resid, "max_drift": trace.max_drift,
                   "decay_ratio": ratio, "monotone_after_transient": trace.monotone_after_transient,
                   "min_density": float(trace.min_density.min())}
    return rep


STUDIES = {
    "identities": study_identities,
    "eval": study_eval,
    "conserve": study_conserve,
    "grazing": study_grazing,
    "spectrum": study_spectrum,
    "relax": study_relax,
}


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def run(config_path, overrides=(), workers=None, out=None, seed=None) -> int:
    """Execute one study and write its artifacts; returns the exit status."""
    try:
        raw = _read_raw(Path(config_path))
        extra = list(overrides)
        if seed is not None:
            extra.append(f"study.seed={seed}")
        if out is not None:
            extra.append(f"output.dir={out}")
        cfg = resolve_config(raw, extra)
        fn = STUDIES[cfg["study"]["kind"]]
        workers = default_workers() if workers is None else max(1, int(workers))
        outdir = Path(cfg["output"]["dir"])
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "config.resolved").write_text(render_resolved(cfg))
    except (ConfigError, ParameterError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        rep = fn(cfg, workers)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ToleranceError as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    (outdir / "data.csv").write_text(rep.csv_text())
    (outdir / "report.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    for c in rep.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']} {c['relation']} {c['threshold']}")
    return 0 if rep.passed else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="boltzlandau", description="Boltzmann and Landau collision operator studies.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a study from a config file")
    r.add_argument("config")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--out", default=None)
    r.add_argument("--seed", type=int, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.config, args.overrides, args.workers, args.out, args.seed)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
