"""Acceptance criteria 1-11, one PASS/FAIL line each.

Run under pytest, or directly with ``python3 tests/test_acceptance.py``.
"""
import contextlib
import io
import itertools
import json
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from confspencer import algebra as al
from confspencer import anyon as an
from confspencer import cli
from confspencer import conformal as cf
from confspencer import curvature as cv
from confspencer import diffeo
from confspencer import jet_gauge as jg
from confspencer import taylor

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
N = 4
FLAT = cv.MetricField.flat((1,) * N)
MINK = cv.MetricField.flat((-1, 1, 1, 1))
SPHERE = cv.MetricField.conformally_flat("ln(2) - ln(1 + x1^2 + x2^2 + x3^2 + x4^2)", (1,) * N)


def box(rng, k, n=N, r=0.4):
    return rng.uniform(-r, r, size=(k, n))


def maxabs(x):
    return float(np.max(np.abs(x)))


def random_factor(rng, degree=3, scale=0.15):
    terms = []
    for d in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(N), d):
            if rng.random() < 0.4:
                terms.append(f"{rng.uniform(-scale, scale):.6f}*" + "*".join(f"x{i + 1}" for i in combo))
    return " + ".join(terms) or "0"


def random_section(rng, eps=0.1):
    a = rng.uniform(-0.2, 0.2, size=(N, 3))
    f = diffeo.DiffeoSpec.from_strings([
        f"x{k + 1} + {a[k, 0]}*x{(k + 1) % N + 1}^2 + {a[k, 1]}*x{k + 1}*x{(k + 2) % N + 1}"
        f" + {a[k, 2]}*x{(k + 3) % N + 1}^3" for k in range(N)])
    t1 = [[f"{v}*x{(i + j) % N + 1} + {w}" for j, (v, w) in enumerate(zip(*rng.uniform(-1, 1, (2, N))))]
          for i in range(N)]
    t2 = [[[f"{v}*x{(i * j + k) % N + 1}" for j, v in enumerate(rng.uniform(-1, 1, N))] for i in range(N)]
          for k in range(N)]
    return jg.DiffeoSection.build(f, twist1=t1, twist2=t2, eps=eps)


def criterion_1():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    flat = 0.0
    for g in (FLAT, MINK):
        for p in box(rng, 10):
            ric, rs = cv.ricci_scalar(g, p)
            flat = max(flat, maxabs(cv.christoffel(g, p)), maxabs(cv.riemann(g, p)), maxabs(ric), abs(rs),
                       maxabs(cv.schouten(g, p)), maxabs(cv.weyl_residual(g, p)))
    sphere = max(abs(cv.ricci_scalar(SPHERE, p)[1] - 12.0) for p in box(rng, 100))
    dt = time.perf_counter() - t0
    ok = flat < 1e-10 and sphere < 1e-8 and dt < 5
    return ok, f"flat max {flat:.1e}; sphere |scalar - 12| {sphere:.1e} at 100 points; {dt:.2f} s"


def criterion_2():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(20):
        g = cv.MetricField.conformally_flat(random_factor(rng), (1,) * N)
        for p in box(rng, 50):
            worst = max(worst, maxabs(cv.weyl_residual(g, p)))
    dt = time.perf_counter() - t0
    return worst < 1e-8 and dt < 30, f"Weyl max {worst:.1e} over 20 factors x 50 points; {dt:.2f} s"


def criterion_3():
    rng = np.random.default_rng(103)
    brute, forms, trace = 0.0, 0.0, 0.0
    for g in (FLAT, SPHERE):
        for _ in range(100):
            cd = cf.ConformalData.build(g, random_factor(rng, scale=0.3))
            p = box(rng, 1)[0]
            s1, s2 = cf.transformed_schouten_forms(cd, p)
            brute = max(brute,
                        maxabs(cf.transformed_connection(cd, p) - cf.transformed_connection_direct(cd, p)),
                        maxabs(cf.transformed_riemann(cd, p) - cf.transformed_riemann_direct(cd, p)),
                        maxabs(s2 - cf.transformed_schouten_direct(cd, p)))
            forms = max(forms, maxabs(s1 - s2))
            trace = max(trace, maxabs(cf.trace_identity_residual(cd, p)))
    ok = brute < 1e-7 and trace < 1e-7 and forms < 1e-10
    return ok, f"formula vs brute force {brute:.1e}; trace identity {trace:.1e}; two Schouten forms {forms:.1e}"


def criterion_4():
    rng = np.random.default_rng(104)
    maps = [(FLAT, diffeo.translation([0.3, -0.1, 0.2, 0.5])), (FLAT, diffeo.dilation(N, 1.7)),
            (FLAT, diffeo.rotation(N, 1, 3, 0.6)), (FLAT, diffeo.special_conformal([0.1, 0.05, -0.08, 0.02])),
            (MINK, diffeo.rotation(N, 0, 1, 0.4, [-1, 1, 1, 1])),
            (MINK, diffeo.special_conformal([0.1, 0.05, -0.08, 0.02], [-1, 1, 1, 1]))]
    worst = max(max(cf.lie_form_residuals(g, f, p)) for g, f in maps for p in box(rng, 10))
    return worst < 1e-7, f"pullback residual max {worst:.1e} over {len(maps)} maps x 10 points"


def criterion_5():
    rng = np.random.default_rng(105)
    hol_maps = [diffeo.special_conformal([0.1, -0.05, 0.08, 0.02]), diffeo.dilation(N, 1.4),
                diffeo.compose(diffeo.rotation(N, 1, 3, 0.4), diffeo.special_conformal([0.05, 0.1, 0, -0.1]))]
    hol, gh = 0.0, 0.0
    for f in hol_maps:
        s = jg.DiffeoSection(f)
        for p in box(rng, 5):
            sc = jg.spencer_comparison(s, p)
            hol = max(hol, *(maxabs(t) for t in (sc.chi0, sc.tau0, sc.chi1, sc.tau1, sc.chi2, sc.tau2)))
            fs = jg.field_strengths(s, FLAT, 0.0, p)
            gh = max(gh, maxabs(fs.G), maxabs(fs.H))
    dual = 0.0
    for _ in range(100):
        s = random_section(rng)
        p = box(rng, 1, r=0.3)[0]
        dual = max(dual, jg.potential_A(s, FLAT, p)[1], jg.potential_B(s, FLAT, 0.0, p)[1])
    kern = 0.0
    for _ in range(10):
        a = rng.uniform(-1, 1, N + 1)
        j = jg.Jet1Field.from_strings(f"{a[0]} + " + " + ".join(f"{v}*x{i + 1}" for i, v in enumerate(a[1:])),
                                      [str(v) for v in a[1:]])
        kern = max(kern, *(maxabs(t) for t in jg.spencer_d1(j, FLAT, 0.0, box(rng, 1)[0])))
    ok = hol < 1e-9 and dual < 1e-7 and gh < 1e-7 and kern < 1e-10
    return ok, (f"holonomic chi/tau {hol:.1e}; trace vs closed {dual:.1e} on 100 sections; "
                f"(G, H) {gh:.1e}; affine kernel {kern:.1e}")


def criterion_6():
    rng = np.random.default_rng(106)
    ratios = []
    for p in box(rng, 5):
        r = [jg.weak_field_residuals(jg.twisted_flow(N, e, sct=[0.3, 0, 0, 0]), FLAT, p) for e in (1e-2, 5e-3, 2.5e-3)]
        for k in range(2):
            ratios += [r[0][k] / r[1][k], r[1][k] / r[2][k]]
    lo, hi = min(ratios), max(ratios)
    return 3.5 <= lo and hi <= 4.5, f"Richardson ratios in [{lo:.3f}, {hi:.3f}] for |F - dA| and |dF|"


def criterion_7():
    rng = np.random.default_rng(107)
    k4 = jg.killing_dimension(FLAT, box(rng, 20))
    k3 = jg.killing_dimension(cv.MetricField.flat((1, 1, 1)), box(rng, 20, 3))
    ok = k4.dimension == 15 and k4.gap_ratio > 1e6 and k3.dimension == 10 and k3.gap_ratio > 1e6
    return ok, f"n=4: {k4.dimension} (gap {k4.gap_ratio:.1e}); n=3: {k3.dimension} (gap {k3.gap_ratio:.1e})"


CORPUS = ["1", "exp(4*alpha)", "A1*A2 + alpha*beta1", "B12*x1 - B21^2 + beta3*A4",
          "exp(alpha)*(A1^2 + A2^2 - A3^2) + x2*B33", "sin(beta2)*x4 + B41*B14"]


def criterion_8():
    rng = np.random.default_rng(108)
    exact = True
    for sig in ((1, 1, 1, 1), (-1, 1, 1, 1)):
        gens = al.generators(N, sig)
        c = al.structure_constants(gens)
        m = len(gens)
        exact &= all(not e for g in gens for row in al.killing_defect(g.xi, sig) for e in row)
        exact &= all(c[a][b][l] == -c[b][a][l] for a in range(m) for b in range(m) for l in range(m))
        exact &= al.jacobi_defect(c) == 0
    gens = al.generators(N)
    c = al.structure_constants(gens)
    cfg = {k: f"{rng.uniform(-0.5, 0.5):.6f}*x{i % N + 1} + {rng.uniform(-0.5, 0.5):.6f}"
           for i, k in enumerate(al.slot_names(N))}
    complex_res = 0.0
    for text in CORPUS:
        table = al.janet_d2_exprs(al.janet_d1_exprs(al.LagrangianDensity.parse(text, N), gens), gens, c)
        for p in box(rng, 50):
            env = al.config_env(cfg, list(table.values()), p)
            complex_res = max(complex_res, max(abs(float(taylor.evaluate(e, env))) for e in table.values()))
    cc = al.c_constraint(c)
    ok = exact and complex_res < 1e-8
    return ok, (f"exact identities {'hold' if exact else 'FAIL'}; D2(D1 L) max {complex_res:.1e}; "
                f"constraint dimension {cc.dimension} (a single free constant would give 1)")


def criterion_9():
    d = cli.DEFAULT_DUALS
    g = cv.MetricField.from_strings(d["metric"])
    L = al.LagrangianDensity.parse(d["lagrangian"], 2)
    v = [al.ibp_imbalance(L, d["config"], g, d["c0"], d["test_alpha"], d["test_beta"], m) for m in (81, 161, 321)]
    ratios = [v[0] / v[1], v[1] / v[2]]
    div2_ok = (np.array_equal(al.div2_pair(["x1", "0"], ["0", "1"], np.zeros(2), 2), [0.0, 1.0])
               and np.array_equal(al.div2_pair(["0.3", "2"], ["1", "-1"], np.array([0.5, 0.5]), 2), [0.0, 0.0]))
    gam = np.arange(8.0).reshape(2, 2, 2)
    Nm = np.array([[1.0, 2.0], [3.0, 4.0]])
    z, _ = al.zeta(gam, Nm)
    zeta_ok = np.array_equal(z, [0 * 1 + 1 * 2 + 2 * 3 + 3 * 4, 4 * 1 + 5 * 2 + 6 * 3 + 7 * 4])
    ok = all(abs(r - 4) <= 0.8 for r in ratios) and div2_ok and zeta_ok
    return ok, (f"refinement ratios {ratios[0]:.3f}, {ratios[1]:.3f} (grids 81/161/321); "
                f"div2 oracle {'exact' if div2_ok else 'FAIL'}; zeta oracle {'exact' if zeta_ok else 'FAIL'}")


def criterion_10():
    rng = np.random.default_rng(110)
    u0 = an.normalized_velocity([0.3, 0.2, -0.1])
    const_rows = [["0"] * 4, ["0", "0", "0", "-0.2"], ["0", "0", "0", "0.1"], ["0", "0.2", "-0.1", "0"]]
    const = an.PolarizationField.from_strings(const_rows, [0, 0, 1.0])
    r0 = np.array([0.1, 0.2, 0.3])
    tr = an.integrate_motion(const, an.CarrierState(0.0, u0, r0), 2.0, 0.01)
    straight = maxabs(tr.r - (r0 + np.outer(tr.t, u0[1:] / u0[0])))
    pf = an.showcase_field()
    st = an.CarrierState(0.0, u0, np.zeros(3))
    norm = an.invariant_monitors(an.integrate_motion(pf, st, 10.0, 1e-3), pf).norm_drift
    _, order = an.richardson_order(pf, st, 1.0, 0.05)
    dens = an.monopole_density(pf, u0, np.zeros(3))
    h = 1e-5
    fd = 0.0
    for r in box(rng, 5, 3, 0.5):
        num = sum((an.effective_faraday(pf, u0, r + h * e)[0][i] - an.effective_faraday(pf, u0, r - h * e)[0][i])
                  / (2 * h) for i, e in enumerate(np.eye(3)))
        fd = max(fd, abs(num - an.monopole_density(pf, u0, r)))
    chi = rng.uniform(-1, 1, (4, 4, 4, 4))
    l1 = an.boost(0.3, 0) @ an.spatial_rotation(0.5, 1, 2)
    l2 = an.boost(-0.7, 2) @ an.spatial_rotation(1.1, 0, 1)
    group = maxabs(an.transport_susceptibility(an.transport_susceptibility(chi, l1), l2)
                   - an.transport_susceptibility(chi, l2 @ l1))
    ok = straight < 1e-12 and norm < 1e-8 and abs(order - 4) <= 1.2 and abs(dens) > 1e-3 and fd < 1e-6 \
        and group < 1e-10
    return ok, (f"straight line {straight:.1e}; norm drift {norm:.1e} over 1e4 steps; order {order:.3f}; "
                f"monopole density {dens:.2e}, FD gap {fd:.1e}; group action {group:.1e}")


def criterion_11():
    with tempfile.TemporaryDirectory() as tmp:
        paths = [Path(tmp) / "a.json", Path(tmp) / "b.json"]
        with contextlib.redirect_stderr(io.StringIO()):
            codes = [cli.main(["verify", str(CONFIGS / "flat.json"), "--report", str(p)]) for p in paths]
        same = paths[0].read_bytes() == paths[1].read_bytes()
    return same and codes == [0, 0], f"two verify runs byte-identical: {same}; exit codes {codes}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10, criterion_11]


def line(k, ok, detail):
    return f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.parametrize("k", range(1, 12))
def test_criterion(k, capsys):
    ok, detail = CRITERIA[k - 1]()
    with capsys.disabled():
        print("\n" + line(k, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    for k, fn in enumerate(CRITERIA, 1):
        print(line(k, *fn()), flush=True)
