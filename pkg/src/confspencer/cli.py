"""Command line front end: ``verify``, ``compute``, ``trajectory`` and ``schema``.

Exit codes: 0 all suites pass, 1 some suite fails, 2 bad configuration,
3 runtime domain error (a partial report is still written).
"""
import argparse
import hashlib
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone

import jsonschema
import numpy as np

from . import __version__
from . import algebra as al
from . import anyon as an
from . import conformal as cf
from . import curvature as cv
from . import diffeo
from . import jet_gauge as jg
from . import taylor
from .jets import DomainError

log = logging.getLogger("confspencer")

REPORT_SCHEMA_VERSION = "1.0"
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

_expr = {"type": "string"}
_vec = {"type": "array", "items": {"type": "number"}}
_map = {
    "type": "object",
    "required": ["family"],
    "properties": {
        "family": {"enum": ["identity", "translation", "dilation", "rotation", "special_conformal",
                            "conformal_flow", "components"]},
        "shift": _vec, "k": {"type": "number"}, "plane": {"type": "array", "items": {"type": "integer"}},
        "angle": {"type": "number"}, "b": _vec, "eps": {"type": "number"},
        "rate": {"type": "number"}, "components": {"type": "array", "items": _expr},
        "twist": {"type": "boolean"},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "confspencer run configuration",
    "type": "object",
    "required": ["dimension", "metric"],
    "properties": {
        "schema_version": {"const": 1},
        "dimension": {"type": "integer", "minimum": 2, "maximum": 9},
        "signature": {"type": "array", "items": {"enum": [-1, 1]}},
        "metric": {
            "oneOf": [
                {"type": "object", "required": ["conformally_flat"],
                 "properties": {"conformally_flat": _expr}, "additionalProperties": False},
                {"type": "object", "required": ["components"],
                 "properties": {"components": {"type": "array", "items": {"type": "array", "items": _expr}}},
                 "additionalProperties": False},
            ]
        },
        "c0": {"type": "number"},
        "seed": {"type": "integer"},
        "points": {
            "type": "object",
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "box": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "list": {"type": "array", "items": _vec},
            },
            "additionalProperties": False,
        },
        "suites": {"type": "array", "items": {"type": "string"}},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "alphas": {"type": "array", "items": _expr},
        "maps": {"type": "array", "items": _map},
        "sections": {"type": "array", "items": _map},
        "weak_field": {
            "type": "object",
            "properties": {"rate": {"type": "number"}, "b": _vec, "eps": _vec},
            "additionalProperties": False,
        },
        "killing": {
            "type": "object",
            "properties": {"expected": {"type": "integer"}, "samples": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "lagrangians": {"type": "array", "items": _expr},
        "lagrangian_config": {"type": "object", "additionalProperties": {"oneOf": [_expr, {"type": "number"}]}},
        "duals": {
            "type": "object",
            "properties": {
                "metric": {"type": "array", "items": {"type": "array", "items": _expr}},
                "lagrangian": _expr, "c0": {"type": "number"},
                "config": {"type": "object", "additionalProperties": _expr},
                "test_alpha": _expr, "test_beta": {"type": "array", "items": _expr},
                "grids": {"type": "array", "items": {"type": "integer", "minimum": 9}, "minItems": 3, "maxItems": 3},
            },
            "additionalProperties": False,
        },
        "anyon": {
            "type": "object",
            "required": ["P", "v"],
            "properties": {
                "P": {"type": "array", "items": {"type": "array", "items": _expr}, "minItems": 4, "maxItems": 4},
                "v": _vec, "mode": {"enum": ["direct", "dual"]},
                "m": {"type": "number"}, "e": {"type": "number"},
                "r0": _vec, "u0_spatial": _vec,
                "t_end": {"type": "number"}, "dt": {"type": "number", "exclusiveMinimum": 0},
                "showcase_point": _vec,
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

ALL_SUITES = ("curvature", "weyl", "conformal", "lie_form", "jet_gauge", "weak_field",
              "killing", "algebra", "duals", "anyon")

SUITE_INFO = {
    "curvature": ("Riemann symmetries and first Bianchi identity",
                  "curvature tensors of a metric field"),
    "weyl": ("Weyl tensor vanishes", "conformally flat metrics have zero Weyl tensor"),
    "conformal": ("rescaling laws match brute force",
                  "connection, Riemann and Schouten under g -> exp(2 alpha) g"),
    "lie_form": ("unimodular metric and connection invariance",
                 "invariance of the unimodular metric under conformal maps"),
    "jet_gauge": ("holonomic sections are pure gauge",
                  "jet comparison tensors, potentials and field strengths"),
    "weak_field": ("weak-field Maxwell residuals are second order",
                   "F - dA and dF along a one-parameter family of sections"),
    "killing": ("conformal Killing dimension", "(n + 1)(n + 2) / 2 conformal Killing fields"),
    "algebra": ("exact conformal algebra and Janet complex",
                "structure constants, Jacobi identity and D2 o D1 = 0"),
    "duals": ("integration-by-parts balance of the adjoint operator",
              "second-order convergence of the discrete adjoint identity"),
    "anyon": ("carrier motion invariants",
              "velocity norm conservation, integrator order and monopole density"),
}

DEFAULT_TOLERANCE = {
    "curvature": 1e-10, "weyl": 1e-8, "conformal": 1e-7, "lie_form": 1e-7, "jet_gauge": 1e-7,
    "weak_field": 0.5, "killing": 0.0, "algebra": 1e-8, "duals": 0.8, "anyon": 1e-8,
}

DEFAULT_DUALS = {
    "metric": [["1 + 0.2*x1^2", "0.1*x1*x2"], ["0.1*x1*x2", "1 + 0.3*sin(x2)"]],
    "lagrangian": "A1*A2 + B12*x1 + B21*B11 + sin(x2)*A1 + B22*B12",
    "c0": 0.7,
    "config": {"A1": "cos(x1 + x2)", "A2": "exp(x1*x2)", "B11": "x1*x2", "B12": "exp(x1 + x2)",
               "B21": "sin(x1*x2)", "B22": "x2*x1^3"},
    "test_alpha": "(1 - x1^2)^4*(1 - x2^2)^4*(1 + x1)",
    "test_beta": ["(1 - x1^2)^4*(1 - x2^2)^4*x2", "(1 - x1^2)^4*(1 - x2^2)^4*(2 - x1)"],
    "grids": [81, 161, 321],
}


class ConfigError(ValueError):
    pass


# configuration

def _locate(raw, text):
    """Line and column of the JSON string literal ``text`` in the raw file, if unique."""
    lit = json.dumps(text)
    i = raw.find(lit)
    if i < 0:
        return None
    return raw.count("\n", 0, i) + 1, i - (raw.rfind("\n", 0, i) + 1) + 1


def _walk_expressions(cfg):
    """Yield ``(path, text, dim)`` for every expression-valued field."""
    n = cfg["dimension"]
    m = cfg["metric"]
    if "conformally_flat" in m:
        yield "metric.conformally_flat", m["conformally_flat"], n
    else:
        for i, row in enumerate(m["components"]):
            for j, e in enumerate(row):
                yield f"metric.components[{i}][{j}]", e, n
    for i, e in enumerate(cfg.get("alphas", [])):
        yield f"alphas[{i}]", e, n
    for key in ("maps", "sections"):
        for i, mp in enumerate(cfg.get(key, [])):
            for j, e in enumerate(mp.get("components", [])):
                yield f"{key}[{i}].components[{j}]", e, n
    for i, e in enumerate(cfg.get("lagrangians", [])):
        yield f"lagrangians[{i}]", e, n
    for k, e in cfg.get("lagrangian_config", {}).items():
        if isinstance(e, str):
            yield f"lagrangian_config.{k}", e, n
    d = cfg.get("duals", {})
    for i, row in enumerate(d.get("metric", [])):
        for j, e in enumerate(row):
            yield f"duals.metric[{i}][{j}]", e, 2
    for k in ("lagrangian", "test_alpha"):
        if k in d:
            yield f"duals.{k}", d[k], 2
    for k, e in d.get("config", {}).items():
        yield f"duals.config.{k}", e, 2
    for i, e in enumerate(d.get("test_beta", [])):
        yield f"duals.test_beta[{i}]", e, 2
    a = cfg.get("anyon")
    if a:
        for i, row in enumerate(a["P"]):
            for j, e in enumerate(row):
                yield f"anyon.P[{i}][{j}]", e, 3


def validate_config(cfg, raw=""):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from None
    n = cfg["dimension"]
    sig = cfg.get("signature", [1] * n)
    if len(sig) != n:
        raise ConfigError(f"signature has {len(sig)} entries, dimension is {n}")
    m = cfg["metric"]
    if "components" in m and (len(m["components"]) != n or any(len(r) != n for r in m["components"])):
        raise ConfigError(f"metric components must be {n}x{n}")
    for s in cfg.get("suites", []):
        if s not in ALL_SUITES:
            raise ConfigError(f"unknown suite {s!r}")
    for path, text, dim in _walk_expressions(cfg):
        try:
            taylor.parse(text, dim)
        except taylor.ExpressionError as exc:
            lc = exc.line_col()
            pos = f" (expression line {lc[0]}, column {lc[1]})" if lc else ""
            filepos = _locate(raw, text)
            loc = f" [config line {filepos[0]}, column {filepos[1] + (exc.position or 0) + 1}]" if filepos else ""
            raise ConfigError(f"bad expression at {path}: {exc}{pos}{loc}") from None
    pts = cfg.get("points", {})
    for p in pts.get("list", []):
        if len(p) != n:
            raise ConfigError(f"evaluation point {p} does not have {n} coordinates")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return validate_config(cfg, raw), raw


def config_hash(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def signature_of(cfg):
    return tuple(cfg.get("signature", [1] * cfg["dimension"]))


def metric_of(cfg):
    m = cfg["metric"]
    sig = signature_of(cfg)
    if "conformally_flat" in m:
        return cv.MetricField.conformally_flat(m["conformally_flat"], sig)
    return cv.MetricField.from_strings(m["components"], sig)


def points_of(cfg):
    n = cfg["dimension"]
    pts = cfg.get("points", {})
    if "list" in pts:
        return np.asarray(pts["list"], dtype=float)
    lo, hi = pts.get("box", [-0.4, 0.4])
    rng = np.random.default_rng(cfg.get("seed", 0))
    return rng.uniform(lo, hi, size=(pts.get("count", 10), n))


def map_of(spec, n, sig):
    fam = spec["family"]
    if fam == "identity":
        return diffeo.identity(n)
    if fam == "translation":
        return diffeo.translation(spec["shift"])
    if fam == "dilation":
        return diffeo.dilation(n, spec["k"])
    if fam == "rotation":
        i, j = spec.get("plane", [0, 1])
        return diffeo.rotation(n, i, j, spec.get("angle", 0.3), list(sig))
    if fam == "special_conformal":
        return diffeo.special_conformal(spec["b"], list(sig))
    if fam == "conformal_flow":
        return diffeo.conformal_flow(n, spec.get("eps", 0.1), spec.get("rate", 1.0), spec.get("b"), list(sig))
    return diffeo.DiffeoSpec.from_strings(spec["components"])


def section_of(spec, n, sig):
    f = map_of(spec, n, sig)
    if spec.get("twist"):
        return jg.DiffeoSection.build(f, twist1=jg.default_twist1(n), twist2=jg.default_twist2(n),
                                      eps=spec.get("eps", 0.1))
    return jg.DiffeoSection(f)


def anyon_of(cfg):
    a = cfg["anyon"]
    pf = an.PolarizationField.from_strings(a["P"], a["v"], a.get("mode", "direct"), a.get("m", 1.0), a.get("e", 1.0))
    u0 = an.normalized_velocity(a.get("u0_spatial", [0.3, 0.2, -0.1]))
    st = an.CarrierState(0.0, u0, np.asarray(a.get("r0", [0.0, 0.0, 0.0]), dtype=float))
    return pf, st, a.get("t_end", 1.0), a.get("dt", 0.01)


# suites

def _maxabs(x):
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


def suite_curvature(cfg, pts):
    g = metric_of(cfg)
    worst = 0.0
    for p in pts:
        G = g.jet(p, 2)
        cv.check_invertible(G.value)
        R = cv.riemann_jet(G).value
        antisym = R + np.einsum("abcd->abdc", R)
        bianchi = R + np.einsum("abcd->acdb", R) + np.einsum("abcd->adbc", R)
        ric = cv.ricci_from_riemann(R)
        worst = max(worst, _maxabs(antisym), _maxabs(bianchi), _maxabs(ric - ric.T))
    return worst, len(pts), {}


def suite_weyl(cfg, pts):
    g = metric_of(cfg)
    return max(_maxabs(cv.weyl_residual(g, p)) for p in pts), len(pts), {}


def suite_conformal(cfg, pts):
    g = metric_of(cfg)
    alphas = cfg.get("alphas", ["0.1*x1*x2 + 0.05*x1^2"])
    worst, internal = 0.0, 0.0
    for a in alphas:
        cd = cf.ConformalData.build(g, a, cfg.get("c0", 0.0))
        for p in pts:
            worst = max(worst,
                        _maxabs(cf.transformed_connection(cd, p) - cf.transformed_connection_direct(cd, p)),
                        _maxabs(cf.transformed_riemann(cd, p) - cf.transformed_riemann_direct(cd, p)))
            if g.dim >= 3:
                first, second = cf.transformed_schouten_forms(cd, p)
                worst = max(worst, _maxabs(second - cf.transformed_schouten_direct(cd, p)))
                internal = max(internal, _maxabs(first - second))
    return max(worst, internal), len(pts) * len(alphas), {"schouten_forms_agreement": internal}


def suite_lie_form(cfg, pts):
    g = metric_of(cfg)
    n, sig = g.dim, signature_of(cfg)
    maps = cfg.get("maps", [{"family": "dilation", "k": 1.3}, {"family": "special_conformal", "b": [0.1] * n}])
    worst = 0.0
    for spec in maps:
        f = map_of(spec, n, sig)
        for p in pts:
            worst = max(worst, *cf.lie_form_residuals(g, f, p))
    return worst, len(pts) * len(maps), {}


def _default_sections(n):
    return [{"family": "special_conformal", "b": [0.1] * n},
            {"family": "conformal_flow", "eps": 0.1, "b": [0.05] * n, "twist": True}]


def suite_jet_gauge(cfg, pts):
    g = metric_of(cfg)
    n, sig = g.dim, signature_of(cfg)
    c0 = cfg.get("c0", 0.0)
    worst = 0.0
    details = {"holonomic": 0.0, "trace_vs_closed": 0.0}
    for spec in cfg.get("sections", _default_sections(n)):
        s = section_of(spec, n, sig)
        for p in pts:
            _, rA = jg.potential_A(s, g, p)
            _, rB = jg.potential_B(s, g, c0, p)
            details["trace_vs_closed"] = max(details["trace_vs_closed"], rA, rB)
            if s.holonomic:
                sc = jg.spencer_comparison(s, p, g, c0)
                fs = jg.field_strengths(s, g, c0, p)
                r = max(_maxabs(sc.chi0), _maxabs(sc.tau0), _maxabs(sc.chi1), _maxabs(sc.tau1),
                        _maxabs(sc.chi2), _maxabs(sc.tau2), _maxabs(fs.G), _maxabs(fs.H))
                details["holonomic"] = max(details["holonomic"], r)
    worst = max(details.values())
    return worst, len(pts), details


def suite_weak_field(cfg, pts):
    g = metric_of(cfg)
    n = g.dim
    wf = cfg.get("weak_field", {})
    eps = wf.get("eps", [1e-2, 5e-3, 2.5e-3])
    b = wf.get("b", [0.3] + [0.0] * (n - 1))
    c0 = cfg.get("c0", 0.0)
    worst, ratios = 0.0, []
    for p in pts:
        r = [jg.weak_field_residuals(jg.twisted_flow(n, e, wf.get("rate", 1.0), b, signature=signature_of(cfg)),
                                     g, p, c0) for e in eps]
        rf = [r[0][0] / r[1][0], r[1][0] / r[2][0]]
        rd = [r[0][1] / r[1][1], r[1][1] / r[2][1]]
        ratios.append(rf + rd)
        worst = max(worst, *[abs(x - 4.0) for x in rf + rd])
    return worst, len(pts), {"ratios": ratios}


def suite_killing(cfg, pts):
    g = metric_of(cfg)
    n = g.dim
    kc = cfg.get("killing", {})
    rng = np.random.default_rng(cfg.get("seed", 0) + 1)
    samples = rng.uniform(-0.4, 0.4, size=(kc.get("samples", 20), n))
    kd = jg.killing_dimension(g, samples, raise_on_gap=False)
    expected = kc.get("expected", (n + 1) * (n + 2) // 2 if g.conformally_flat_tag else None)
    details = {"dimension": kd.dimension, "gap_ratio": kd.gap_ratio, "expected": expected}
    if kd.gap_ratio < 1e6:
        return float("inf"), len(samples), details
    resid = 0.0 if expected is None else float(abs(kd.dimension - expected))
    return resid, len(samples), details


def suite_algebra(cfg, pts):
    n, sig = cfg["dimension"], signature_of(cfg)
    gens = al.generators(n, sig)
    c = al.structure_constants(gens)
    killing = max((abs(v) for g_ in gens for row in al.killing_defect(g_.xi, sig) for e in row
                   for v in e.values()), default=0)
    antisym = max(abs(c[a][b][k] + c[b][a][k]) for a in range(len(c)) for b in range(len(c)) for k in range(len(c)))
    jac = al.jacobi_defect(c)
    cc = al.c_constraint(c)
    worst = float(max(killing, antisym, jac))
    lags = cfg.get("lagrangians", [f"exp({n}*alpha)"])
    lcfg = cfg.get("lagrangian_config") or {k: "0.3*x1 - 0.2*x2 + 0.1" for k in al.slot_names(n)}
    complex_res = 0.0
    for text in lags:
        L = al.LagrangianDensity.parse(text, n)
        K = al.janet_d1_exprs(L, gens)
        for p in pts:
            complex_res = max(complex_res, _maxabs(al.janet_d2(K, gens, c, lcfg, p)))
    details = {"generators": len(gens), "exact_defect": str(max(killing, antisym, jac)),
               "c_constraint_dimension": cc.dimension, "d2_of_d1": complex_res}
    return max(worst, complex_res), len(pts) * len(lags), details


def suite_duals(cfg, pts):
    d = dict(DEFAULT_DUALS)
    d.update(cfg.get("duals", {}))
    g = cv.MetricField.from_strings(d["metric"])
    L = al.LagrangianDensity.parse(d["lagrangian"], 2)
    vals = [al.ibp_imbalance(L, d["config"], g, d["c0"], d["test_alpha"], d["test_beta"], m) for m in d["grids"]]
    ratio = vals[1] / vals[2]
    # div2 hand oracle: div2(x1 e1 (x) e2) = e2 on flat space
    oracle = _maxabs(al.div2_pair(["x1", "0"], ["0", "1"], np.zeros(2), 2) - np.array([0.0, 1.0]))
    return max(abs(ratio - 4.0), oracle), len(d["grids"]), {"imbalances": vals, "ratio": ratio}


def suite_anyon(cfg, pts):
    if "anyon" not in cfg:
        pf, st, t_end, dt = an.showcase_field(), an.CarrierState(0.0, an.normalized_velocity([0.3, 0.2, -0.1]),
                                                                 np.zeros(3)), 1.0, 0.01
        point = np.zeros(3)
    else:
        pf, st, t_end, dt = anyon_of(cfg)
        point = np.asarray(cfg["anyon"].get("showcase_point", st.r), dtype=float)
    traj = an.integrate_motion(pf, st, t_end, dt)
    rep = an.invariant_monitors(traj, pf)
    ratio, order = an.richardson_order(pf, st, t_end, dt * 4)
    dens = an.monopole_density(pf, st.u, point)
    details = {"wu_drift": rep.wu_drift, "richardson_ratio": ratio, "observed_order": order,
               "monopole_density": dens, "samples": len(traj.t)}
    return rep.norm_drift, len(traj.t), details


SUITES = {
    "curvature": suite_curvature, "weyl": suite_weyl, "conformal": suite_conformal,
    "lie_form": suite_lie_form, "jet_gauge": suite_jet_gauge, "weak_field": suite_weak_field,
    "killing": suite_killing, "algebra": suite_algebra, "duals": suite_duals, "anyon": suite_anyon,
}

RUNTIME_ERRORS = (DomainError, cf.PreconditionError, an.IntegrationError, al.HypothesisError,
                  al.MissingSlotError, jg.IllConditionedError, taylor.EvaluationError, ValueError)


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def run_suite(cfg, suite_filter=None):
    """Run the selected suites; returns ``(exit_code, report, timing)``."""
    names = list(suite_filter or cfg.get("suites") or ALL_SUITES)
    tol = dict(DEFAULT_TOLERANCE)
    tol.update(cfg.get("tolerances", {}))
    pts = points_of(cfg)
    entries, timing = [], {}
    code = EXIT_PASS
    for name in ALL_SUITES:
        if name not in names:
            continue
        identity, ref = SUITE_INFO[name]
        t0 = time.perf_counter()
        entry = {"name": name, "identity": identity, "reference": ref, "tolerance": tol[name]}
        try:
            resid, count, details = SUITES[name](cfg, pts)
            entry.update(max_residual=resid, points=count, passed=bool(resid <= tol[name]), details=details)
            if not entry["passed"] and code == EXIT_PASS:
                code = EXIT_FAIL
            log.info("%s: residual %.3e (tol %.1e)", name, resid, tol[name])
        except RUNTIME_ERRORS as exc:
            entry.update(max_residual=None, points=0, passed=False, error=f"{type(exc).__name__}: {exc}")
            code = EXIT_RUNTIME
            log.error("%s: %s", name, exc)
        timing[name] = time.perf_counter() - t0
        entries.append(_clean(entry))
        if code == EXIT_RUNTIME:
            break
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "toolkit_version": __version__,
        "config_sha256": config_hash(cfg),
        "seed": cfg.get("seed", 0),
        "suites": entries,
        "exit_code": code,
    }
    return code, report, timing


def dump_report(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# compute

def _labels(shape):
    return [",".join(str(i) for i in idx) for idx in np.ndindex(*shape)] if shape else [""]


def format_components(name, arr):
    arr = np.asarray(arr, dtype=float)
    lines = []
    for lab, v in zip(_labels(arr.shape), arr.reshape(-1)):
        lines.append(f"{name}[{lab}] = {v:.17g}" if lab else f"{name} = {v:.17g}")
    return "\n".join(lines)


def compute_quantity(cfg, what, at, section=0):
    """Dictionary ``label -> array`` for a named quantity at point ``at``."""
    n, sig = cfg["dimension"], signature_of(cfg)
    p = np.asarray(at, dtype=float)
    if what in ("B_eff", "E_eff", "w", "monopole_density"):
        if "anyon" in cfg:
            pf, st, _, _ = anyon_of(cfg)
        else:
            pf, st = an.showcase_field(), an.CarrierState(0.0, an.normalized_velocity([0.3, 0.2, -0.1]), np.zeros(3))
        if p.shape != (3,):
            raise ConfigError("anyon quantities take a 3-vector position")
        if what == "w":
            return {"w": pf.w(p)}
        if what == "monopole_density":
            return {"monopole_density": np.array(an.monopole_density(pf, st.u, p))}
        B, E = an.effective_faraday(pf, st.u, p)
        return {"B_eff": B, "E_eff": E}
    if p.shape != (n,):
        raise ConfigError(f"point must have {n} coordinates")
    g = metric_of(cfg)
    c0 = cfg.get("c0", 0.0)
    if what == "metric":
        return {"g": g.at(p)}
    if what == "christoffel":
        return {"christoffel": cv.christoffel(g, p)}
    if what == "riemann":
        return {"riemann": cv.riemann(g, p)}
    if what in ("ricci", "scalar"):
        ric, rs = cv.ricci_scalar(g, p)
        return {"ricci": ric} if what == "ricci" else {"scalar": np.array(rs)}
    if what == "schouten":
        return {"schouten": cv.schouten(g, p)}
    if what == "weyl":
        return {"weyl": cv.weyl_residual(g, p)}
    if what == "unimodular":
        return {"unimodular": cv.unimodular(g, p)}
    if what in ("potential_A", "potential_B", "fields", "nu", "phi0"):
        specs = cfg.get("sections", _default_sections(n))
        s = section_of(specs[section], n, sig)
        if what == "potential_A":
            return {"A": jg.potential_A(s, g, p)[0]}
        if what == "potential_B":
            return {"calB": jg.potential_B(s, g, c0, p)[0]}
        if what == "nu":
            return {"nu": jg.gauge_metric_nu(s, g, p)}
        if what == "phi0":
            a, b = jg.phi0(s, g, p)
            return {"alpha": np.array(a), "beta": b}
        fs = jg.field_strengths(s, g, c0, p)
        return {"F": fs.F, "P": fs.P, "G": fs.G, "H": fs.H}
    if what == "K":
        gens = al.generators(n, sig)
        lags = cfg.get("lagrangians", [f"exp({n}*alpha)"])
        L = al.LagrangianDensity.parse(lags[0], n)
        return {"K": al.janet_d1(L, gens, cfg.get("lagrangian_config", {}), p)}
    raise KeyError(what)


COMPUTE_NAMES = ("metric", "christoffel", "riemann", "ricci", "scalar", "schouten", "weyl", "unimodular",
                 "potential_A", "potential_B", "fields", "nu", "phi0", "K", "B_eff", "E_eff", "w",
                 "monopole_density")


# entry point

def _parse_point(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse point {text!r}") from None


def build_parser():
    ap = argparse.ArgumentParser(prog="confspencer", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    v = sub.add_parser("verify", help="run identity suites and write a JSON report")
    v.add_argument("config")
    v.add_argument("--suite", action="append", choices=ALL_SUITES)
    v.add_argument("--report", help="report path (default: stdout)")
    v.add_argument("--timing", help="path for wall times and timestamp (default: <report>.timing.json)")
    c = sub.add_parser("compute", help="evaluate one quantity at a point")
    c.add_argument("config")
    c.add_argument("--what", required=True, choices=COMPUTE_NAMES)
    c.add_argument("--at", required=True, help='comma separated coordinates, e.g. "0,0,0,0"')
    c.add_argument("--section", type=int, default=0)
    t = sub.add_parser("trajectory", help="integrate carrier motion and write CSV")
    t.add_argument("config")
    t.add_argument("--out", required=True)
    sub.add_parser("schema", help="print the configuration JSON schema")
    return ap


def main(argv=None):
    logging.basicConfig(level=os.environ.get("CONFSPENCER_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.verb == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=2, sort_keys=True))
        return EXIT_PASS
    try:
        cfg, _ = load_config(args.config)
        if args.verb == "compute":
            at = _parse_point(args.at)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.verb == "verify":
        code, report, timing = run_suite(cfg, args.suite)
        text = dump_report(report)
        stamp = {"generated_at": datetime.now(timezone.utc).isoformat(), "wall_time_s": timing}
        if args.report:
            with open(args.report, "w") as fh:
                fh.write(text)
            with open(args.timing or args.report + ".timing.json", "w") as fh:
                fh.write(json.dumps(stamp, indent=2, sort_keys=True) + "\n")
        else:
            sys.stdout.write(text)
            if args.timing:
                with open(args.timing, "w") as fh:
                    fh.write(json.dumps(stamp, indent=2, sort_keys=True) + "\n")
        for e in report["suites"]:
            status = "PASS" if e["passed"] else ("ERROR" if "error" in e else "FAIL")
            print(f"{status} {e['name']}: {e['identity']}", file=sys.stderr)
        return code

    if args.verb == "compute":
        try:
            out = compute_quantity(cfg, args.what, at, args.section)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except RUNTIME_ERRORS as exc:
            print(f"runtime error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        print("\n".join(format_components(k, v) for k, v in out.items()))
        return EXIT_PASS

    if "anyon" not in cfg:
        print("config error: trajectory needs an 'anyon' block", file=sys.stderr)
        return EXIT_CONFIG
    try:
        pf, st, t_end, dt = anyon_of(cfg)
        traj = an.integrate_motion(pf, st, t_end, dt)
        an.write_csv(args.out, traj, pf)
    except RUNTIME_ERRORS as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
