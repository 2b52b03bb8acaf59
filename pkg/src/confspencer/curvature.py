"""Metric fields and the tensors derived from them at a point.

Index layout of returned arrays (all plain ``numpy`` arrays):

* ``christoffel``: ``G[a, b, c] = Gamma^a_{bc}``
* ``riemann``: ``R[a, b, c, d] = R^a_{bcd}`` with
  ``R(X, Y)Z = R^a_{bcd} Z^b X^c Y^d``, so the round sphere is positive
* ``ricci``: ``Ric[b, d] = R^a_{bad}``, which is the first-slot trace of
  the ``(a, X, Y, Z)`` ordering of ``R(X, Y)Z``

Every routine has a ``*_jet`` twin that works on Taylor jets of the
metric, so that derivatives of curvature are available when needed.
"""
from dataclasses import dataclass, field

import numpy as np

from . import jets, taylor
from .jets import DomainError, Jet

DET_TOL = 1e-12


@dataclass(frozen=True)
class MetricField:
    """Symmetric metric with Expression components.

    Either ``components`` (upper triangle used) or ``factor`` is given; a
    factor ``phi`` means ``g = exp(2 phi) diag(signature)``.
    """

    dim: int
    signature: tuple
    components: tuple = None
    factor: taylor.Node = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_strings(cls, rows, signature=None):
        n = len(rows)
        comps = tuple(
            tuple(taylor.parse(str(rows[i][j]) if j >= i else str(rows[j][i]), n) for j in range(n))
            for i in range(n)
        )
        if signature is None:
            signature = (1,) * n
        return cls(n, tuple(signature), components=comps)

    @classmethod
    def conformally_flat(cls, factor, signature):
        n = len(signature)
        if isinstance(factor, str):
            factor = taylor.parse(factor, n)
        return cls(n, tuple(int(s) for s in signature), factor=factor)

    @classmethod
    def flat(cls, signature):
        return cls.conformally_flat(taylor.Num(0.0), signature)

    @property
    def conformally_flat_tag(self):
        return self.factor is not None

    def jet(self, p, order):
        """Taylor jet of the component matrix at ``p``, shape (n, n)."""
        p = np.asarray(p, dtype=float)
        n = self.dim
        if p.shape != (n,):
            raise ValueError(f"point must have {n} coordinates")
        if self.factor is not None:
            phi = taylor.eval_jet(self.factor, p, order)
            scale = jets.exp(phi * 2.0)
            return Jet(np.diag(np.asarray(self.signature, float))[..., None] * scale.c, n, order)
        env = taylor.coordinate_env(p, order)
        entries = {}
        for i in range(n):
            for j in range(i, n):
                v = taylor.evaluate(self.components[i][j], env)
                entries[i, j] = v if isinstance(v, Jet) else Jet.constant(v, n, order)
        rows = [jets.stack([entries[min(i, j), max(i, j)] for j in range(n)]) for i in range(n)]
        return jets.stack(rows)

    def at(self, p):
        g = self.jet(p, 0).value
        check_invertible(g)
        return g

    def expressions(self):
        """Component expressions, expanding a conformal factor if present."""
        n = self.dim
        if self.factor is None:
            return self.components
        scale = taylor.Call("exp", taylor.mul(taylor.num(2), self.factor))
        return tuple(
            tuple(taylor.mul(taylor.num(self.signature[i]), scale) if i == j else taylor.Num(0.0)
                  for j in range(n))
            for i in range(n)
        )


def check_invertible(g):
    d = np.linalg.det(g)
    if abs(d) <= DET_TOL:
        raise DomainError(f"metric is singular (|det| = {abs(d):.3e})")
    return d


# jet-level kernels

def christoffel_from(g, dg):
    """Christoffel symbols from metric values and ``dg[i, j, k] = d_k g_ij``.

    Works on jets or plain arrays; used directly and for metrics composed
    with a map.
    """
    ginv = jets.inv(g) if isinstance(g, Jet) else np.linalg.inv(g)
    # low[d, b, c] = (d_b g_dc + d_c g_db - d_d g_bc) / 2
    low = (jeinsum_any("dcb->dbc", dg) + dg - jeinsum_any("bcd->dbc", dg)) * 0.5
    return jeinsum_any("ad,dbc->abc", ginv, low)


def jeinsum_any(spec, *ops):
    if any(isinstance(o, Jet) for o in ops):
        return jets.jeinsum(spec, *ops)
    return np.einsum(spec, *ops)


def christoffel_jet(G):
    return christoffel_from(G.truncate(G.order - 1), G.grad())


def riemann_from_christoffel(Gam):
    """Riemann jet from a Christoffel jet (loses one order)."""
    dG = Gam.grad()  # dG[a, b, c, k] = d_k Gamma^a_bc
    G0 = Gam.truncate(Gam.order - 1)
    t1 = jets.jeinsum("adbc->abcd", dG)  # d_c Gamma^a_db
    quad = jets.jeinsum("ace,edb->abcd", G0, G0)
    curl = t1 + quad
    return curl - jets.jeinsum("abdc->abcd", curl)


def riemann_jet(G):
    return riemann_from_christoffel(christoffel_jet(G))


def ricci_from_riemann(R):
    return jeinsum_any("abad->bd", R)


def scalar_from(ginv, ric):
    return jeinsum_any("bd,bd->", ginv, ric)


def schouten_from(g, ric, rs, n):
    return ric - jeinsum_any(",ab->ab", rs, g) * (1.0 / (2.0 * (n - 1)))


def weyl_from(g, R, sigma, n):
    """Riemann minus its Schouten part, covariant layout ``[U, X, Y, Z]``."""
    lowered = np.einsum("ua,azxy->uxyz", g, R)
    s = (np.einsum("xu,yz->uxyz", g, sigma) - np.einsum("yu,xz->uxyz", g, sigma)
         + np.einsum("yz,xu->uxyz", g, sigma) - np.einsum("xz,yu->uxyz", g, sigma))
    return lowered - s / (n - 2)


# point-level operations

def christoffel(g, p):
    G = g.jet(p, 1)
    check_invertible(G.value)
    return christoffel_jet(G).value


def riemann(g, p):
    G = g.jet(p, 2)
    check_invertible(G.value)
    return riemann_jet(G).value


def ricci_scalar(g, p):
    G = g.jet(p, 2)
    check_invertible(G.value)
    ric = ricci_from_riemann(riemann_jet(G).value)
    rs = float(scalar_from(np.linalg.inv(G.value), ric))
    return ric, rs


def _require_dim(g, least, what):
    if g.dim < least:
        raise ValueError(f"{what} requires dimension >= {least}, got {g.dim}")


def schouten(g, p):
    _require_dim(g, 3, "schouten")
    ric, rs = ricci_scalar(g, p)
    return schouten_from(g.at(p), ric, rs, g.dim)


def weyl_residual(g, p):
    _require_dim(g, 3, "weyl_residual")
    G = g.jet(p, 2)
    g0 = G.value
    check_invertible(g0)
    R = riemann_jet(G).value
    ric = ricci_from_riemann(R)
    rs = scalar_from(np.linalg.inv(g0), ric)
    return weyl_from(g0, R, schouten_from(g0, ric, rs, g.dim), g.dim)


def trace1(t):
    """Contract the first contravariant slot with the first covariant slot."""
    t = np.asarray(t, dtype=float)
    if t.ndim < 2 or t.shape[0] != t.shape[1]:
        raise ValueError(f"trace1 needs matching first two axes, got shape {t.shape}")
    return np.trace(t, axis1=0, axis2=1)


def trace_omega(g0, t):
    g0 = np.asarray(g0, dtype=float)
    t = np.asarray(t, dtype=float)
    if t.shape != g0.shape:
        raise ValueError(f"shape mismatch {t.shape} vs {g0.shape}")
    check_invertible(g0)
    return float(np.einsum("ab,ab->", np.linalg.inv(g0), t))


def sharp(g0, a):
    g0 = np.asarray(g0, dtype=float)
    a = np.asarray(a, dtype=float)
    if a.shape != g0.shape[:1]:
        raise ValueError(f"shape mismatch {a.shape} vs metric {g0.shape}")
    check_invertible(g0)
    return np.linalg.solve(g0, a)


def unimodular_of(g0):
    g0 = np.asarray(g0, dtype=float)
    n = g0.shape[-1]
    d = np.abs(np.linalg.det(g0))
    return g0 / d[..., None, None] ** (1.0 / n)


def unimodular_jet(G):
    ld, _ = jets.logabsdet(G)
    scale = jets.exp(ld * (-1.0 / G.shape[-1]))
    return jets.jeinsum(",ab->ab", scale, G)


def unimodular(g, p):
    return unimodular_of(g.at(p))
