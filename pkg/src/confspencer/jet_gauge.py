"""Jet-level gauge objects built from sections ``(f, f1, f2)``.

Conventions (arrays are indexed in the order the subscripts are written):

* ``A = f1^-1 J`` and ``B = J^-1 f1`` with ``J[k, b] = d_b f^k``.
* ``tau1[l, i, j]``: ``i`` is the acted-on slot, ``j`` the derivative slot.
* ``tau2[l, y, z, x]``: ``(y, z)`` acted-on slots, ``x`` the derivative slot.
* ``calB[j, i]`` holds the mixed potential with ``i`` the derivative slot.
* ``ell[k] = Gamma^h_{hk} = d_k ln|det g| / 2``.

Sections are evaluated as Taylor jets of order 2 at the point, which is
enough for one derivative of every potential.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import conformal as cf
from . import curvature as cv
from . import diffeo, jets, taylor
from .jets import DomainError, Jet

ORDER = 2


@dataclass(frozen=True)
class Jet1Field:
    """Independent scalar ``alpha`` and one-form ``beta`` fields."""

    alpha: taylor.Node
    beta: tuple

    @classmethod
    def from_strings(cls, alpha, beta):
        n = len(beta)
        return cls(taylor.parse(alpha, n), tuple(taylor.parse(b, n) for b in beta))

    @classmethod
    def gradient_of(cls, alpha, n):
        a = taylor.parse(alpha, n) if isinstance(alpha, str) else alpha
        return cls(a, tuple(taylor.differentiate(a, i + 1) for i in range(n)))

    def jets(self, p, order):
        a = taylor.eval_jet(self.alpha, p, order)
        b = jets.stack([taylor.eval_jet(e, p, order) for e in self.beta])
        return a, b


def _parse_array(arr, n):
    if isinstance(arr, str):
        return taylor.parse(arr, n)
    if isinstance(arr, taylor.Node):
        return arr
    return tuple(_parse_array(a, n) for a in arr)


@dataclass(frozen=True)
class DiffeoSection:
    """Groupoid section: a map with independent first and second jet slots.

    ``f1``/``f2`` left as ``None`` mean the true jets of ``f``; ``twist1`` and
    ``twist2`` are added on top, scaled by ``eps``.
    """

    f: diffeo.DiffeoSpec
    f1: tuple = None
    f2: tuple = None
    twist1: tuple = None
    twist2: tuple = None
    eps: float = 0.0

    @property
    def dim(self):
        return self.f.dim

    @property
    def holonomic(self):
        twisted = self.eps != 0 and (self.twist1 is not None or self.twist2 is not None)
        return self.f1 is None and self.f2 is None and not twisted

    @classmethod
    def build(cls, f, f1=None, f2=None, twist1=None, twist2=None, eps=0.0):
        n = f.dim
        conv = lambda a: None if a is None else _parse_array(a, n)
        return cls(f, conv(f1), conv(f2), conv(twist1), conv(twist2), float(eps))

    @classmethod
    def identity(cls, n):
        return cls(diffeo.identity(n))

    def slots(self, p, order):
        """Jets ``(f, f1, f2)`` at ``p``; ``f`` has order ``order + 1``."""
        p = np.asarray(p, dtype=float)
        need = order + 2 if self.f2 is None else (order + 1)
        fj = self.f.jets(p, max(need, order + 1))
        F = jets.stack(fj)
        f1 = F.grad() if self.f1 is None else _eval_array(self.f1, p, order)
        f1 = f1.truncate(order)
        if self.f2 is None:
            f2 = F.grad().grad().truncate(order)
        else:
            f2 = _eval_array(self.f2, p, order)
        if self.eps != 0 and self.twist1 is not None:
            f1 = f1 + _eval_array(self.twist1, p, order) * self.eps
        if self.eps != 0 and self.twist2 is not None:
            f2 = f2 + _eval_array(self.twist2, p, order) * self.eps
        f2 = (f2 + jets.jeinsum("kij->kji", f2)) * 0.5
        return [j.truncate(order + 1) for j in fj], f1, f2


def _eval_array(arr, p, order):
    if isinstance(arr, taylor.Node):
        return taylor.eval_jet(arr, p, order)
    return jets.stack([_eval_array(a, p, order) for a in arr])


# metric data

def _log_det(g, q, order):
    G = g.jet(q, order)
    cv.check_invertible(G.value)
    return jets.logabsdet(G)[0], G


def ell_jet(g, q, order):
    """Jet of ``ell_k = d_k ln|det g| / 2`` at ``q``."""
    L, _ = _log_det(g, q, order + 1)
    return L.grad() * 0.5


def mu_from_values(g0, gam, c0, a, b):
    """Second-order slot of the extended jet, from ``alpha`` and ``beta``.

    ``mu = ((c0 (1 - e^{2a}) - |b|^2) g + b(Gamma + Gamma^T)) / 2 + b (x) b``;
    all arguments may be jets.
    """
    ginv = jets.inv(g0) if isinstance(g0, Jet) else np.linalg.inv(g0)
    sq = cv.jeinsum_any("a,ab,b->", b, ginv, b)
    e2 = jets.exp(a * 2.0) if isinstance(a, Jet) else np.exp(2.0 * a)
    scal = (1.0 - e2) * c0 - sq
    sym = cv.jeinsum_any("a,axy->xy", b, gam) + cv.jeinsum_any("a,ayx->xy", b, gam)
    return (cv.jeinsum_any(",xy->xy", scal, g0) + sym) * 0.5 + cv.jeinsum_any("x,y->xy", b, b)


def mu_from_jet(j, g, c0, p):
    p = np.asarray(p, dtype=float)
    G = g.jet(p, 1)
    cv.check_invertible(G.value)
    gam = cv.christoffel_jet(G).value
    a, b = j.jets(p, 0)
    return mu_from_values(G.value, gam, c0, float(a.value), b.value)


# section data

@dataclass
class SpencerComparison:
    A: np.ndarray
    B: np.ndarray
    chi0: np.ndarray
    tau0: np.ndarray
    chi1: np.ndarray
    tau1: np.ndarray
    chi2: np.ndarray
    tau2: np.ndarray
    residuals: dict = field(default_factory=dict)


@dataclass
class SectionData:
    """Everything derived from a section at one point, mostly as jets."""

    n: int
    J: Jet
    f1: Jet
    f2: Jet
    f1inv: Jet
    A: Jet
    B: Jet
    tau1: Jet
    alpha: Jet
    beta: Jet
    ell: Jet
    ell_f: Jet
    dell_f: np.ndarray
    gam: Jet
    g: Jet
    f3: np.ndarray = None
    tau2: np.ndarray = None
    mu: Jet = None


def _check_section(f1_0, J0):
    if abs(np.linalg.det(f1_0)) < 1e-12:
        raise DomainError("section slot f1 is singular")
    if abs(np.linalg.det(J0)) < 1e-12:
        raise DomainError("jacobian of f is singular")


def section_data(s, g, p, c0=0.0, pad="derivative"):
    n = s.dim
    p = np.asarray(p, dtype=float)
    fj, f1, f2 = s.slots(p, ORDER)
    F = jets.stack(fj)
    J = F.grad()  # order ORDER
    _check_section(f1.value, J.value)
    f1inv = jets.inv(f1)
    A = jets.matmul(f1inv, J)
    B = jets.matmul(jets.inv(J), f1)

    # tau1[l, i, j] = f1inv[l, k] (B[m, j] d_m f1[k, i] - f2[k, i, j])
    df1 = f1.grad()  # [k, i, m]
    inner = jets.jeinsum("mj,kim->kij", B.truncate(ORDER - 1), df1) - f2.truncate(ORDER - 1)
    tau1 = jets.jeinsum("lk,kij->lij", f1inv.truncate(ORDER - 1), inner)

    q = F.value
    Lq, _ = _log_det(g, q, ORDER + 1)
    ell_q = Lq.grad() * 0.5
    fx = [j.truncate(ORDER) for j in fj]
    L_f = jets.compose(Lq.truncate(ORDER), fx)
    ell_f = jets.compose(ell_q, fx)
    dell_f = ell_q.grad().value

    Lp, G = _log_det(g, p, ORDER + 1)
    ell = Lp.grad() * 0.5
    gam = cv.christoffel_jet(G)

    ldf1, _ = jets.logabsdet(f1)
    alpha = (ldf1 + (L_f - Lp.truncate(ORDER)) * 0.5) * (1.0 / n)
    Fm = jets.jeinsum("lk,kij->lij", f1inv, f2)
    beta = (jets.jeinsum("p,pa->a", ell_f, f1) + jets.jeinsum("kka->a", Fm) - ell) * (1.0 / n)

    d = SectionData(n, J, f1, f2, f1inv, A, B, tau1, alpha, beta, ell, ell_f, dell_f, gam, G.truncate(ORDER))
    d.mu = mu_from_values(d.g, gam, c0, alpha, beta)
    d.f3 = lift_third(d, pad, s, p)
    d.tau2 = _tau2(d, d.f3)
    return d


def _sym3(t):
    # symmetrize t[k, a, b, c] over (a, b, c)
    perms = ("kabc", "kacb", "kbac", "kbca", "kcab", "kcba")
    return sum(np.einsum(f"{pp}->kabc", t) for pp in perms) / 6.0


def lift_third(d, pad, s, p):
    """Third-order slot chosen inside the conformal third-order system.

    ``pad`` is the free symmetric part (``"derivative"`` uses ``d f2``,
    ``"zero"`` uses nothing); the trace part is fixed by the second-order
    data so that the potentials do not depend on the choice.
    """
    n = d.n
    f1 = d.f1.value
    f1inv = np.linalg.inv(f1)
    f2 = d.f2.value
    if pad == "derivative":
        raw = d.f2.grad().value  # [k, y, z, x] = d_x f2[k, y, z]
    elif pad == "zero":
        raw = np.zeros((n,) * 4)
    else:
        raise ValueError(f"unknown pad {pad!r}")
    psi0 = _sym3(np.einsum("lk,kabc->labc", f1inv, raw))
    Fm = np.einsum("lk,kij->lij", f1inv, f2)
    dell = d.ell.grad().value
    T = (np.einsum("kqi,qkj->ij", Fm, Fm) + n * d.mu.value + dell
         - np.einsum("qp,qi,pj->ij", d.dell_f, f1, f1) - np.einsum("p,pij->ij", d.ell_f.value, f2))
    T = 0.5 * (T + T.T)
    S = (T - np.einsum("kkab->ab", psi0)) / (n + 2)
    eye = np.eye(n)
    psi = psi0 + (np.einsum("ab,cd->abcd", eye, S) + np.einsum("ac,bd->abcd", eye, S)
                  + np.einsum("ad,bc->abcd", eye, S))
    return np.einsum("kl,labc->kabc", f1, psi)


def _tau2(d, f3):
    B = d.B.value
    df2 = d.f2.grad().value  # [k, y, z, m]
    f2 = d.f2.value
    t1 = d.tau1.value
    rhs = (np.einsum("mx,kyzm->kyzx", B, df2) - f3
           - np.einsum("kym,mzx->kyzx", f2, t1) - np.einsum("kzm,myx->kyzx", f2, t1))
    return np.einsum("lk,kyzx->lyzx", d.f1inv.value, rhs)


def spencer_comparison(s, p, g=None, c0=0.0, pad="derivative"):
    n = s.dim
    if g is None:
        g = cv.MetricField.flat((1,) * n)
    d = section_data(s, g, p, c0, pad)
    A, B = d.A.value, d.B.value
    eye = np.eye(n)
    tau0 = eye - B
    chi0 = A - eye
    tau1 = d.tau1.value
    chi1 = np.einsum("lim,mj->lij", tau1, A)
    chi2 = np.einsum("lyzm,mx->lyzx", d.tau2, A)

    # re-substitution into the unsimplified defining relations
    f1, f2 = d.f1.value, d.f2.value
    df1 = d.f1.grad().value
    r1 = (np.einsum("kim,mj->kij", f2, tau0) + np.einsum("kl,lij->kij", f1, tau1)
          - np.einsum("mj,kim->kij", B, df1 - np.einsum("kmi->kim", f2)))
    df2 = d.f2.grad().value
    r2 = (np.einsum("kyzm,mx->kyzx", d.f3, tau0) + np.einsum("kym,mzx->kyzx", f2, tau1)
          + np.einsum("kzm,myx->kyzx", f2, tau1) + np.einsum("kl,lyzx->kyzx", f1, d.tau2)
          - np.einsum("mx,kyzm->kyzx", B, df2 - np.einsum("kyzm->kyzm", d.f3)))
    res = {"BA": float(np.abs(B @ A - eye).max()), "tau1": float(np.abs(r1).max()),
           "tau2": float(np.abs(r2).max())}
    return SpencerComparison(A, B, chi0, tau0, chi1, tau1, chi2, d.tau2, res)


def phi0(s, g, p):
    d = section_data(s, g, p)
    return float(d.alpha.value), d.beta.value


# potentials

def _potentials(d, c0):
    n = d.n
    B1 = d.B.truncate(ORDER - 1)
    dalpha = d.alpha.grad()
    A_closed = jets.jeinsum("ki,k->i", B1, dalpha) - d.beta.truncate(ORDER - 1)
    tau0 = Jet.constant(np.eye(n), n, ORDER - 1) - B1
    A_trace = (jets.jeinsum("kki->i", d.tau1) + jets.jeinsum("ki,k->i", tau0, d.ell.truncate(ORDER - 1))) * (1.0 / n)
    dbeta = d.beta.grad()  # [j, k] = d_k beta_j
    calB = (jets.jeinsum("ki,jk->ji", B1, dbeta) - d.mu.truncate(ORDER - 1)
            - jets.jeinsum("kji,k->ji", d.tau1, d.beta.truncate(ORDER - 1)))
    dell = d.ell.grad().value  # [j, k] = d_k ell_j
    B_trace = (np.einsum("kkji->ji", d.tau2) + np.einsum("kji,k->ji", d.tau1.value, d.ell.value)
               + np.einsum("ki,jk->ji", tau0.value, dell)) / n
    return A_closed, A_trace.value, calB, B_trace


def check_c0(g, c0, p, tol=1e-6):
    cf.check_constant_curvature(g, c0, p, tol)


def potential_A(s, g, p):
    """Electromagnetic potential; returns ``(closed_form, trace_form_residual)``."""
    d = section_data(s, g, p)
    A_closed, A_trace, _, _ = _potentials(d, 0.0)
    return A_closed.value, float(np.abs(A_closed.value - A_trace).max())


def potential_B(s, g, c0, p, pad="derivative", check=True):
    """Mixed potential ``calB[j, i]``; returns ``(closed_form, trace_form_residual)``."""
    if check:
        check_c0(g, c0, p)
    d = section_data(s, g, p, c0, pad)
    _, _, calB, B_trace = _potentials(d, c0)
    return calB.value, float(np.abs(calB.value - B_trace).max())


def gauge_metric_nu(s, g, p):
    d = section_data(s, g, p)
    B = d.B.value
    return B.T @ d.g.value @ B


@dataclass
class FieldStrengths:
    G: np.ndarray
    H: np.ndarray
    F: np.ndarray
    P: np.ndarray
    E: np.ndarray
    A: np.ndarray
    calB: np.ndarray
    dA: np.ndarray
    dF: np.ndarray


def field_strengths(s, g, c0, p, check=True, pad="derivative"):
    if check:
        check_c0(g, c0, p)
    d = section_data(s, g, p, c0, pad)
    A_j, _, calB_j, _ = _potentials(d, c0)
    n = d.n
    A = A_j.value
    calB = calB_j.value
    B = d.B.value
    t1 = d.tau1.value
    gam = d.gam.value
    F = 0.5 * (calB - calB.T)
    P = 0.5 * (calB + calB.T)
    dA_raw = A_j.grad().value  # [j, h] = d_h A_j
    bA = np.einsum("hi,jh->ij", B, dA_raw)  # bA[i, j] = B^h_i d_h A_j
    G = 0.5 * (bA - bA.T) - F - 0.5 * np.einsum("kji,k->ij", t1 - np.einsum("kij->kji", t1), A)
    # E[j, k, i] = sym(Gamma)^m_jk calB[m, i] - c0 g_jk A_i
    E = (0.5 * np.einsum("mjk,mi->jki", gam + gam.transpose(0, 2, 1), calB)
         - c0 * np.einsum("jk,i->jki", d.g.value, A))
    dB_raw = calB_j.grad().value  # [j, i, h] = d_h calB[j, i]
    bB = np.einsum("hk,jih->jki", B, dB_raw)  # bB[j, k, i] = B^h_k d_h calB[j, i]
    t2 = d.tau2
    H = (bB - np.einsum("jki->jik", bB)
         - (E - np.einsum("jki->jik", E))
         - np.einsum("rik,jr->jki", t1 - np.einsum("rik->rki", t1), calB)
         - (np.einsum("rjk,ri->jki", t1, calB) - np.einsum("rji,rk->jki", t1, calB))
         - np.einsum("rjik,r->jki", t2 - np.einsum("rjik->rjki", t2), A)) * 0.5
    dA = 0.5 * (dA_raw.T - dA_raw)  # dA[i, j] = (d_i A_j - d_j A_i) / 2
    dF_raw = 0.5 * (dB_raw - np.einsum("jih->ijh", dB_raw))  # d_h F[j, i]
    # cyclic sum d_k F_ji + d_j F_ik + d_i F_kj, stored [k, j, i]
    dF = (np.einsum("jik->kji", dF_raw) + np.einsum("ikj->kji", dF_raw) + np.einsum("kji->kji", dF_raw))
    return FieldStrengths(G, H, F, P, E, A, calB, dA, dF)


def weak_field_residuals(s, g, p, c0=0.0):
    fs = field_strengths(s, g, c0, p, check=False)
    return float(np.abs(fs.F - fs.dA).max()), float(np.abs(fs.dF).max())


def twisted_flow(n, eps, rate=1.0, sct=None, twist1=None, twist2=None, signature=None):
    """Non-holonomic family through the identity section at ``eps = 0``."""
    f = diffeo.conformal_flow(n, eps, rate, sct, signature)
    if twist1 is None:
        twist1 = default_twist1(n)
    if twist2 is None:
        twist2 = default_twist2(n)
    return DiffeoSection.build(f, twist1=twist1, twist2=twist2, eps=eps)


def default_twist1(n):
    xs = [taylor.coord(i) for i in range(n)]
    return [[f"{0.3 * (i - j)}*{xs[(i + j) % n]} + {0.1 * (i + 1)}*{xs[i]}*{xs[j]}" for j in range(n)]
            for i in range(n)]


def default_twist2(n):
    xs = [taylor.coord(i) for i in range(n)]
    return [[[f"{0.2 * ((k + 1) * (i + 1) - j)}*{xs[(i + j + k) % n]}" for j in range(n)] for i in range(n)]
            for k in range(n)]


# linear operators

def killing_K(g, xi0, xi1, p):
    """Trace part ``(div + Gamma trace) / n`` of the conformal Killing operator on 1-jets."""
    n = g.dim
    p = np.asarray(p, dtype=float)
    env = {taylor.coord(i): float(v) for i, v in enumerate(p)}
    x0 = np.array([taylor.eval_float(_parse_array(e, n), env) for e in xi0])
    x1 = np.array([[taylor.eval_float(_parse_array(e, n), env) for e in row] for row in xi1])
    gam = cv.christoffel(g, p)
    return float((np.trace(x1) + np.einsum("iik,k->", gam, x0)) / n)


def holonomic_lift(xi0, n):
    """``(xi0, d xi0)`` with ``xi1[i][j] = d_j xi^i``."""
    ex = [_parse_array(e, n) for e in xi0]
    return ex, [[taylor.differentiate(e, j + 1) for j in range(n)] for e in ex]


def _monomials(n, degree):
    from itertools import combinations_with_replacement
    out = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(n), d):
            e = [0] * n
            for v in combo:
                e[v] += 1
            out.append(tuple(e))
    return out


@dataclass
class KillingDimension:
    dimension: int
    gap_ratio: float
    singular_values: np.ndarray
    unknowns: int


class IllConditionedError(RuntimeError):
    pass


def killing_dimension(g, sample_points, degree=2, min_gap=1e6, raise_on_gap=True):
    """Dimension of polynomial conformal Killing fields of ``g`` by collocation.

    Rows are the trace-free part of the Lie derivative of ``g`` along each
    basis field, evaluated at the sample points.
    """
    n = g.dim
    if degree < 2:
        raise ValueError("polynomial ansatz degree must be >= 2")
    monos = _monomials(n, degree)
    nm = len(monos)
    rows = []
    iu = np.triu_indices(n)
    for p in sample_points:
        p = np.asarray(p, dtype=float)
        G = g.jet(p, 1)
        g0 = G.value
        cv.check_invertible(g0)
        ginv = np.linalg.inv(g0)
        dg = G.grad().value  # [i, j, k] = d_k g_ij
        x = jets.Jet.coordinates(p, 1)
        block = np.zeros((len(iu[0]), n * nm))
        for m, e in enumerate(monos):
            mono = None
            for i, k in enumerate(e):
                if k:
                    t = jets.integer_power(x[i], k)
                    mono = t if mono is None else mono * t
            val = 1.0 if mono is None else float(mono.value)
            grad = np.zeros(n) if mono is None else mono.grad().value
            for c in range(n):
                # field with component c equal to the monomial
                xi = np.zeros(n)
                xi[c] = val
                dxi = np.zeros((n, n))  # dxi[k, i] = d_i xi^k
                dxi[c] = grad
                lie = np.einsum("k,ijk->ij", xi, dg) + np.einsum("kj,ki->ij", g0, dxi) + np.einsum("ik,kj->ij", g0, dxi)
                tf = lie - np.einsum("ab,ab->", ginv, lie) / n * g0
                block[:, c * nm + m] = tf[iu]
        rows.append(block)
    M = np.vstack(rows)
    sv = np.linalg.svd(M, compute_uv=False)
    sv_full = np.zeros(n * nm)
    sv_full[: len(sv)] = sv
    # values far below double precision are clamped so exact zeros tie
    clamped = np.maximum(sv_full, sv_full[0] * 1e-20)
    gaps = clamped[:-1] / clamped[1:]
    # rank at the largest relative drop
    rank = int(np.argmax(gaps)) + 1
    gap = float(gaps[rank - 1])
    if raise_on_gap and gap < min_gap:
        raise IllConditionedError(f"collocation rank is ambiguous (gap ratio {gap:.3e})")
    return KillingDimension(n * nm - rank, gap, sv_full, n * nm)


def spencer_d1(j, g, c0, p, form="exterior"):
    """Linearized operator ``(alpha, beta) -> (d alpha - beta, d beta - mu)``.

    ``form="exterior"`` takes the exterior derivative of ``beta``
    (``calB[j, i] = d_i beta_j - d_j beta_i - mu_ij``), which is the form
    whose adjoint is the divergence pair implemented in
    ``conformal_algebra``; ``form="gradient"`` keeps the full gradient
    ``d_i beta_j``.
    """
    p = np.asarray(p, dtype=float)
    G = g.jet(p, 1)
    cv.check_invertible(G.value)
    gam = cv.christoffel_jet(G).value
    a, b = j.jets(p, 1)
    da = a.grad().value
    db = b.grad().value  # [j, i] = d_i beta_j
    mu = linear_mu(G.value, gam, c0, float(a.value), b.value)
    if form == "exterior":
        lead = db - db.T
    elif form == "gradient":
        lead = db
    else:
        raise ValueError(f"unknown form {form!r}")
    return da - b.value, lead - mu


def linear_mu(g0, gam, c0, a, b):
    return 0.5 * np.einsum("a,axy->xy", b, gam + gam.transpose(0, 2, 1)) - c0 * a * g0


# covariance under a change of chart by a conformal map

def transform_jet1(j, f, f_inv, p, order=1):
    """Jets at ``y0 = f(p)`` of the transformed pair ``(alpha', beta')``.

    ``alpha' o f = alpha - (1/n) ln|det J|`` and
    ``beta' o f = J^-T (beta - (1/n) d ln|det J|)``, with ``J`` the Jacobian of ``f``.
    """
    p = np.asarray(p, dtype=float)
    n = f.dim
    y0 = f(p)
    xy = f_inv.jets(y0, order + 1)
    back = np.array([float(x.value) for x in xy])
    if np.abs(back - p).max() > 1e-10:
        raise ValueError("f_inv is not the inverse of f at p")
    J = jets.stack(f.jets(p, order + 2)).grad()  # [k, b] = d_b f^k
    ld, _ = jets.logabsdet(J)
    a = ld * (1.0 / n)
    al, be = j.jets(p, order + 1)
    alpha_x = al - a
    Jinv = jets.inv(J.truncate(order))
    beta_x = jets.jeinsum("ji,j->i", Jinv, be.truncate(order) - a.grad())
    return jets.compose(alpha_x, xy), jets.compose(beta_x, [x.truncate(order) for x in xy])


def covariance_residuals(j, f, f_inv, p, form="exterior"):
    """Residuals of ``A' o f = J^-T A`` and ``calB' o f = J^-T calB J^-1`` on flat space with c0 = 0."""
    p = np.asarray(p, dtype=float)
    n = f.dim
    g = cv.MetricField.flat((1,) * n)
    A, calB = spencer_d1(j, g, 0.0, p, form)
    a2, b2 = transform_jet1(j, f, f_inv, p)
    db = b2.grad().value  # [j, i] = d_i beta'_j
    A2 = a2.grad().value - b2.value
    calB2 = db - db.T if form == "exterior" else db
    Jinv = np.linalg.inv(f.jet(p, 1).grad().value)
    rA = np.abs(A2 - Jinv.T @ A).max()
    rB = np.abs(calB2 - Jinv.T @ calB @ Jinv).max()
    return float(rA), float(rB)
