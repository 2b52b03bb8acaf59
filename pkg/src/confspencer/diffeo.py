"""Closed-form maps of a chart and their jets.

The named families are the flat-space conformal transformations, with a
signature so that Lorentzian charts are covered too.
"""
from dataclasses import dataclass

import numpy as np

from . import jets, taylor


@dataclass(frozen=True)
class DiffeoSpec:
    """A map ``x -> f(x)`` given by one Expression per target coordinate."""

    components: tuple

    @property
    def dim(self):
        return len(self.components)

    @classmethod
    def from_strings(cls, comps):
        n = len(comps)
        return cls(tuple(taylor.parse(c, n) for c in comps))

    def jets(self, p, order):
        """List of scalar jets ``f^i`` at ``p``."""
        return [taylor.eval_jet(c, p, order) for c in self.components]

    def jet(self, p, order):
        return jets.stack(self.jets(p, order))

    def __call__(self, p):
        env = {taylor.coord(i): float(v) for i, v in enumerate(p)}
        return np.array([taylor.eval_float(c, env) for c in self.components])


def _fmt(v):
    return repr(float(v)) if v >= 0 else f"({float(v)!r})"


def _quad(sig, u, v):
    return " + ".join(f"{_fmt(s)}*{a}*{b}" for s, a, b in zip(sig, u, v))


def _xs(n):
    return [taylor.coord(i) for i in range(n)]


def identity(n):
    return DiffeoSpec.from_strings(_xs(n))


def translation(shift):
    return DiffeoSpec.from_strings([f"{x} + {_fmt(c)}" for x, c in zip(_xs(len(shift)), shift)])


def dilation(n, k):
    return DiffeoSpec.from_strings([f"{_fmt(k)}*{x}" for x in _xs(n)])


def linear(matrix):
    m = np.asarray(matrix, dtype=float)
    xs = _xs(m.shape[0])
    return DiffeoSpec.from_strings([" + ".join(f"{_fmt(m[i, j])}*{xs[j]}" for j in range(len(xs))) for i in range(len(xs))])


def rotation(n, i, j, angle, signature=None):
    """Rotation (or boost, for mixed signature) in the (i, j) coordinate plane."""
    sig = signature or (1,) * n
    m = np.eye(n)
    if sig[i] * sig[j] > 0:
        c, s = np.cos(angle), np.sin(angle)
        m[i, i], m[i, j], m[j, i], m[j, j] = c, -s, s, c
    else:
        c, s = np.cosh(angle), np.sinh(angle)
        m[i, i], m[i, j], m[j, i], m[j, j] = c, s, s, c
    return linear(m)


def special_conformal(b, signature=None):
    """``(x - <x,x> b) / (1 - 2<b,x> + <b,b><x,x>)`` with the flat form of ``signature``."""
    n = len(b)
    sig = signature or (1,) * n
    xs = _xs(n)
    xx = _quad(sig, xs, xs)
    bx = " + ".join(f"{_fmt(s * c)}*{x}" for s, c, x in zip(sig, b, xs))
    bb = float(sum(s * c * c for s, c in zip(sig, b)))
    den = f"(1 - 2*({bx}) + {_fmt(bb)}*({xx}))"
    return DiffeoSpec.from_strings([f"({x} - ({xx})*{_fmt(c)}) / {den}" for x, c in zip(xs, b)])


def compose(outer, inner):
    """``outer o inner`` by substitution."""
    mapping = {taylor.coord(i): c for i, c in enumerate(inner.components)}
    return DiffeoSpec(tuple(taylor.substitute(c, mapping) for c in outer.components))


def conformal_flow(n, eps, dilation_rate=1.0, sct=None, signature=None):
    """Element at parameter ``eps`` of a mix of dilation and special conformal flows."""
    sct = np.zeros(n) if sct is None else np.asarray(sct, dtype=float)
    f = dilation(n, float(np.exp(eps * dilation_rate)))
    return compose(special_conformal(eps * sct, signature), f)
