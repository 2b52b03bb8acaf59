"""Conformal transformation laws for ``g -> exp(2 alpha) g``.

Each formula is paired with a brute-force route that recomputes the same
object from the rescaled metric; the ``*_residual`` helpers return the
difference.
"""
from dataclasses import dataclass

import numpy as np

from . import curvature as cv
from . import jets, taylor
from .jets import DomainError

OVERFLOW_EXP = 700.0


@dataclass(frozen=True)
class ConformalData:
    g: cv.MetricField
    alpha: taylor.Node
    c0: float = 0.0

    @classmethod
    def build(cls, g, alpha, c0=0.0):
        if isinstance(alpha, str):
            alpha = taylor.parse(alpha, g.dim)
        return cls(g, alpha, float(c0))

    @property
    def dim(self):
        return self.g.dim


class PreconditionError(ValueError):
    pass


def rescaled_field(cd):
    """The metric ``exp(2 alpha) g`` as a MetricField of its own."""
    g = cd.g
    if g.factor is not None:
        return cv.MetricField.conformally_flat(taylor.add(g.factor, cd.alpha), g.signature)
    scale = taylor.Call("exp", taylor.mul(taylor.num(2), cd.alpha))
    comps = tuple(tuple(taylor.mul(scale, c) for c in row) for row in g.components)
    return cv.MetricField(g.dim, g.signature, components=comps)


def _alpha_jet(cd, p, order):
    return taylor.eval_jet(cd.alpha, p, order)


def _check_overflow(a0):
    if 2.0 * a0 > OVERFLOW_EXP:
        raise DomainError(f"exp(2 alpha) overflows (2 alpha = {2 * a0:.1f})")


def rescale_metric(cd, p):
    a = float(_alpha_jet(cd, p, 0).value)
    _check_overflow(a)
    return np.exp(2.0 * a) * cd.g.at(p)


def _pieces(cd, p, order):
    """Metric jet, alpha jet, d alpha and the raised gradient at ``p``."""
    G = cd.g.jet(p, order)
    cv.check_invertible(G.value)
    a = _alpha_jet(cd, p, order)
    _check_overflow(float(a.value))
    return G, a


def connection_correction(g0, da):
    """``delta^a_b da_c + delta^a_c da_b - g_bc (g^-1 da)^a``; arrays or jets."""
    n = g0.shape[-1]
    eye = np.eye(n)
    ginv = jets.inv(g0) if isinstance(g0, jets.Jet) else np.linalg.inv(g0)
    up = cv.jeinsum_any("ad,d->a", ginv, da)
    return (cv.jeinsum_any("ab,c->abc", eye, da) + cv.jeinsum_any("ac,b->abc", eye, da)
            - cv.jeinsum_any("bc,a->abc", g0, up))


def transformed_connection(cd, p):
    G, a = _pieces(cd, p, 1)
    gam = cv.christoffel_jet(G).value
    return gam + connection_correction(G.value, a.grad().value)


def transformed_connection_direct(cd, p):
    return cv.christoffel(rescaled_field(cd), p)


def _grad_data(cd, p):
    """Values needed by the curvature transformation laws at ``p``."""
    G, a = _pieces(cd, p, 2)
    g0 = G.value
    ginv = np.linalg.inv(g0)
    gam_j = cv.christoffel_jet(G)
    gam = gam_j.value
    da = a.grad().value
    hess = a.grad().grad().value  # hess[i, j] = d_j d_i alpha
    # raised gradient A = *d alpha as a jet, then its covariant derivative
    up_j = jets.jeinsum("ad,d->a", jets.inv(G.truncate(1)), a.grad())
    up = up_j.value
    # DA[a, c] = (nabla_c A)^a
    DA = up_j.grad().value + np.einsum("acb,b->ac", gam, up)
    return dict(g=g0, ginv=ginv, gam=gam, da=da, hess=hess, up=up, DA=DA, riemann=cv.riemann_from_christoffel(gam_j).value)


def transformed_riemann(cd, p):
    """Riemann tensor of the rescaled metric from the transformation law.

    Terms follow the law written for ``R(X, Y)Z`` in slots ``[a, X, Y, Z]``;
    the result is returned in the standard ``R^a_{bcd}`` layout.
    """
    d = _grad_data(cd, p)
    g, da, up, DA = d["g"], d["da"], d["up"], d["DA"]
    n = cd.dim
    eye = np.eye(n)
    sq = float(da @ up)
    DAlow = g @ DA  # DAlow[Z, X] = omega(nabla_X A, Z)
    P = np.einsum("abcd->acdb", d["riemann"])
    P = P + np.einsum("xz,ay->axyz", g, DA) - np.einsum("yz,ax->axyz", g, DA)
    P = P + np.einsum("zx,ay->axyz", DAlow + sq * g, eye)
    P = P - np.einsum("zy,ax->axyz", DAlow + sq * g, eye)
    P = P + np.einsum("xyz,a->axyz", np.einsum("x,yz->xyz", da, g) - np.einsum("y,xz->xyz", da, g), up)
    P = P + np.einsum("ax,y,z->axyz", eye, da, da) - np.einsum("ay,x,z->axyz", eye, da, da)
    return np.einsum("axyz->azxy", P)


def transformed_riemann_direct(cd, p):
    return cv.riemann(rescaled_field(cd), p)


def mu_tensor(alpha, p, dim=None):
    """Symmetrized coordinate Hessian of ``alpha``."""
    p = np.asarray(p, dtype=float)
    if isinstance(alpha, str):
        alpha = taylor.parse(alpha, dim or p.shape[0])
    h = taylor.eval_jet(alpha, p, 2).grad().grad().value
    return 0.5 * (h + h.T)


def _schouten_base(cd, p):
    cv._require_dim(cd.g, 3, "schouten transformation")
    return cv.schouten(cd.g, p)


def transformed_schouten_forms(cd, p):
    """Both forms of the Schouten transformation law: (covariant Hessian, split Hessian)."""
    d = _grad_data(cd, p)
    n = cd.dim
    g, da, up = d["g"], d["da"], d["up"]
    sigma = _schouten_base(cd, p)
    sq = float(da @ up)
    DAlow = g @ d["DA"]
    first = sigma + (n - 2) * (np.outer(da, da) - DAlow.T - 0.5 * sq * g)
    mu = 0.5 * (d["hess"] + d["hess"].T)
    sym_gam = np.einsum("a,axy->xy", da, d["gam"] + d["gam"].transpose(0, 2, 1))
    second = sigma + (n - 2) * (np.outer(da, da) - mu + 0.5 * sym_gam - 0.5 * sq * g)
    return first, second


def transformed_schouten(cd, p):
    return transformed_schouten_forms(cd, p)[1]


def transformed_schouten_direct(cd, p):
    return cv.schouten(rescaled_field(cd), p)


def measured_c0(g, p):
    """Sectional-curvature constant ``rho_s / (n (n - 1))`` at ``p``."""
    _, rs = cv.ricci_scalar(g, p)
    return rs / (g.dim * (g.dim - 1))


def check_constant_curvature(g, c0, p, tol=1e-6):
    c = measured_c0(g, p)
    if abs(c - c0) > tol:
        raise PreconditionError(
            f"substrate curvature constant {c:.9g} at p differs from c0 = {c0:.9g}"
        )


def reduced_rhs(g0, gam, c0, a, da):
    """Right side of the reduced second-order system for ``mu``.

    ``a`` is the value of alpha and ``da`` its gradient (or the independent
    one-form slot); arrays or jets.
    """
    ginv = np.linalg.inv(g0)
    sq = float(da @ ginv @ da)
    sym_gam = np.einsum("a,axy->xy", da, gam + gam.transpose(0, 2, 1))
    return 0.5 * ((c0 * (1.0 - np.exp(2.0 * a)) - sq) * g0 + sym_gam) + np.outer(da, da)


def constraint_residual(cd, p, check=True):
    """``mu`` minus the right side of the reduced system (zero for conformal maps)."""
    if check:
        check_constant_curvature(cd.g, cd.c0, p)
    G, a = _pieces(cd, p, 2)
    gam = cv.christoffel_jet(G).value
    da = a.grad().value
    h = a.grad().grad().value
    mu = 0.5 * (h + h.T)
    return mu - reduced_rhs(G.value, gam, cd.c0, float(a.value), da)


def trace_identity_residual(cd, p):
    gam = cv.christoffel(cd.g, p)
    gt = transformed_connection(cd, p)
    da = taylor.eval_jet(cd.alpha, p, 1).grad().value
    return np.einsum("aba->b", gt) - np.einsum("aba->b", gam) - cd.dim * da


def pullback_metric_jet(g, f, p, order):
    """Jet at ``p`` of ``J^T g(f(x)) J`` for the map ``f``."""
    fj = f.jets(p, order + 1)
    q = np.array([float(j.value) for j in fj])
    gq = jets.compose(g.jet(q, order), [j.truncate(order) for j in fj])
    J = jets.stack(fj).grad()  # J[k, b] = d_b f^k
    return jets.jeinsum("kb,kl,lc->bc", J, gq, J)


def lie_form_residuals(g, f, p):
    """Max-norm residuals of invariance of the unimodular metric and its connection.

    The unimodular metric is a density, so its transform under ``f`` is the
    unimodular part of the ordinary pullback ``J^T g(f) J``, and the
    transformed connection is the Levi-Civita connection of that.
    """
    p = np.asarray(p, dtype=float)
    P = cv.unimodular_jet(pullback_metric_jet(g, f, p, 1))
    H = cv.unimodular_jet(g.jet(p, 1))
    r_metric = np.abs(P.value - H.value).max()
    r_conn = np.abs(cv.christoffel_jet(P).value - cv.christoffel_jet(H).value).max()
    return float(r_metric), float(r_conn)
