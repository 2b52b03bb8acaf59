"""Truncated multivariate Taylor arithmetic on arrays of jets.

A ``Jet`` stores, for every array entry, the Taylor coefficients
``d^I f(p) / I!`` for all multi-indices ``|I| <= order``.  Coefficients are
ordered by total degree, so the table of a lower order is a prefix of the
table of a higher order and truncation is a slice.
"""
from functools import lru_cache
from itertools import combinations_with_replacement
import math

import numpy as np

from . import _kernels

MAX_ORDER = 4
MAX_DIM = 9


class DomainError(ValueError):
    """A primitive was evaluated outside its differentiable domain."""


class MultiIndexTable:
    def __init__(self, n, order):
        self.n = n
        self.order = order
        rows = []
        for deg in range(order + 1):
            block = []
            for combo in combinations_with_replacement(range(n), deg):
                e = [0] * n
                for v in combo:
                    e[v] += 1
                block.append(tuple(e))
            # lexicographic, highest power of x1 first
            block.sort(reverse=True)
            rows.extend(block)
        self.index = np.array(rows, dtype=np.int64).reshape(len(rows), n)
        self.pos = {r: k for k, r in enumerate(rows)}
        self.ncoef = len(rows)
        self.degree = self.index.sum(axis=1)
        self.factorial = np.array(
            [math.prod(math.factorial(v) for v in r) for r in rows], dtype=float
        )

        pi, pj, pk = [], [], []
        for a, ra in enumerate(rows):
            for b, rb in enumerate(rows):
                if self.degree[a] + self.degree[b] > order:
                    continue
                pi.append(a)
                pj.append(b)
                pk.append(self.pos[tuple(x + y for x, y in zip(ra, rb))])
        self.pi = np.array(pi, dtype=np.int64)
        self.pj = np.array(pj, dtype=np.int64)
        self.pk = np.array(pk, dtype=np.int64)
        self.scatter = np.zeros((len(pi), self.ncoef))
        self.scatter[np.arange(len(pi)), self.pk] = 1.0

        # derivative maps into the order-1 table
        self.dsrc = []
        self.dfac = []
        nlow = int(np.sum(self.degree <= order - 1))
        for v in range(n):
            src = np.empty(nlow, dtype=np.int64)
            fac = np.empty(nlow)
            for k in range(nlow):
                r = list(rows[k])
                fac[k] = r[v] + 1
                r[v] += 1
                src[k] = self.pos[tuple(r)]
            self.dsrc.append(src)
            self.dfac.append(fac)


@lru_cache(maxsize=None)
def table(n, order):
    if not 1 <= n <= MAX_DIM:
        raise ValueError(f"jet dimension must be in 1..{MAX_DIM}, got {n}")
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
    return MultiIndexTable(n, order)


def ncoef(n, order):
    return math.comb(n + order, order)


class Jet:
    """Array of truncated Taylor expansions in ``n`` variables."""

    __array_priority__ = 100
    __slots__ = ("c", "n", "order")

    def __init__(self, c, n, order):
        c = np.asarray(c, dtype=float)
        if c.shape[-1] != ncoef(n, order):
            raise ValueError("coefficient axis does not match (n, order)")
        self.c = c
        self.n = n
        self.order = order

    # construction
    @classmethod
    def constant(cls, value, n, order):
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (ncoef(n, order),))
        c[..., 0] = value
        return cls(c, n, order)

    @classmethod
    def variable(cls, i, value, n, order):
        """The coordinate function x_{i+1} expanded at ``value``."""
        c = np.zeros(ncoef(n, order))
        c[0] = value
        if order >= 1:
            c[1 + i] = 1.0
        return cls(c, n, order)

    @classmethod
    def coordinates(cls, point, order):
        point = np.asarray(point, dtype=float)
        n = point.shape[0]
        return [cls.variable(i, point[i], n, order) for i in range(n)]

    # inspection
    @property
    def shape(self):
        return self.c.shape[:-1]

    @property
    def value(self):
        return self.c[..., 0]

    @property
    def table(self):
        return table(self.n, self.order)

    def coeff(self, multi):
        return self.c[..., self.table.pos[tuple(multi)]]

    def partial(self, multi):
        t = self.table
        k = t.pos[tuple(multi)]
        return self.c[..., k] * t.factorial[k]

    def truncate(self, order):
        if order > self.order:
            raise ValueError("cannot raise jet order")
        if order == self.order:
            return self
        return Jet(self.c[..., : ncoef(self.n, order)], self.n, order)

    def deriv(self, i):
        if self.order == 0:
            raise ValueError("order-0 jet has no derivative information")
        t = self.table
        return Jet(self.c[..., t.dsrc[i]] * t.dfac[i], self.n, self.order - 1)

    def grad(self):
        """Stack of first partials on a new trailing axis."""
        return stack([self.deriv(i) for i in range(self.n)], axis=-1)

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx):
            idx = idx + (slice(None),)
        return Jet(self.c[idx], self.n, self.order)

    def __len__(self):
        return self.shape[0]

    def __repr__(self):
        return f"Jet(shape={self.shape}, n={self.n}, order={self.order})"

    # arithmetic
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.n != self.n:
                raise ValueError("jets over different variable counts")
            order = min(self.order, other.order)
            return self.truncate(order), other.truncate(order)
        return self, None

    def __add__(self, other):
        a, b = self._coerce(other)
        if b is not None:
            return Jet(a.c + b.c, a.n, a.order)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(a.shape, other.shape)
        c = np.array(np.broadcast_to(a.c, shape + (a.c.shape[-1],)))
        c[..., 0] += other
        return Jet(c, a.n, a.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.n, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._coerce(other)
        if b is None:
            other = np.asarray(other, dtype=float)
            return Jet(a.c * other[..., None], a.n, a.order)
        return Jet(_mul_arrays(a.c, b.c, a.n, a.order), a.n, a.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        other = np.asarray(other, dtype=float)
        if np.any(other == 0):
            raise DomainError("division by zero")
        return Jet(self.c / other[..., None], self.n, self.order)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, q):
        return power(self, q)


def _mul_arrays(a, b, n, order):
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    m = ncoef(n, order)
    a2 = np.broadcast_to(a, shape + (m,)).reshape(-1, m)
    b2 = np.broadcast_to(b, shape + (m,)).reshape(-1, m)
    out = _kernels.jet_mul(a2, b2, table(n, order))
    return out.reshape(shape + (m,))


def stack(jets, axis=0):
    jets = list(jets)
    order = min(j.order for j in jets)
    n = jets[0].n
    ax = axis - 1 if axis < 0 else axis  # skip the coefficient axis
    cs = [j.truncate(order).c for j in jets]
    return Jet(np.stack(cs, axis=ax), n, order)


def as_jet(x, like):
    if isinstance(x, Jet):
        return x
    return Jet.constant(x, like.n, like.order)


def min_order(*xs):
    orders = [x.order for x in xs if isinstance(x, Jet)]
    return min(orders) if orders else None


# univariate primitives

def _compose(a, derivs):
    """f(a) from Taylor coefficients ``derivs[m] = f^(m)(a0)/m!``."""
    bar = Jet(a.c.copy(), a.n, a.order)
    bar.c[..., 0] = 0.0
    out = Jet.constant(derivs[a.order], a.n, a.order)
    for m in range(a.order - 1, -1, -1):
        out = out * bar + derivs[m]
    return out


def _scaled(ds):
    return [d / math.factorial(m) for m, d in enumerate(ds)]


def exp(a):
    if not isinstance(a, Jet):
        return np.exp(a)
    e = np.exp(a.value)
    return _compose(a, _scaled([e] * (a.order + 1)))


def log(a):
    if not isinstance(a, Jet):
        a = np.asarray(a, dtype=float)
        if np.any(a <= 0):
            raise DomainError("ln of non-positive value")
        return np.log(a)
    v = a.value
    if np.any(v <= 0):
        raise DomainError("ln of non-positive value")
    ds = [np.log(v)]
    for m in range(1, a.order + 1):
        ds.append((-1) ** (m - 1) * math.factorial(m - 1) / v**m)
    return _compose(a, _scaled(ds))


def sin(a):
    if not isinstance(a, Jet):
        return np.sin(a)
    s, c = np.sin(a.value), np.cos(a.value)
    cyc = [s, c, -s, -c]
    return _compose(a, _scaled([cyc[m % 4] for m in range(a.order + 1)]))


def cos(a):
    if not isinstance(a, Jet):
        return np.cos(a)
    s, c = np.sin(a.value), np.cos(a.value)
    cyc = [c, -s, -c, s]
    return _compose(a, _scaled([cyc[m % 4] for m in range(a.order + 1)]))


def tanh(a):
    if not isinstance(a, Jet):
        return np.tanh(a)
    t = np.tanh(a.value)
    s = 1.0 - t * t
    ds = [t, s, -2 * t * s, -2 * s * s + 4 * t * t * s, 16 * t * s * s - 8 * t**3 * s]
    return _compose(a, _scaled(ds[: a.order + 1]))


def _real_power_derivs(v, q, order):
    ds = []
    coef = 1.0
    for m in range(order + 1):
        ds.append(coef * v ** (q - m))
        coef *= q - m
    return _scaled(ds)


def sqrt(a):
    if not isinstance(a, Jet):
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise DomainError("sqrt of negative value")
        return np.sqrt(a)
    v = a.value
    if np.any(v < 0) or (a.order > 0 and np.any(v == 0)):
        raise DomainError("sqrt outside its differentiable domain")
    if a.order == 0:
        return Jet.constant(np.sqrt(v), a.n, 0)
    return _compose(a, _real_power_derivs(v, 0.5, a.order))


def absolute(a):
    if not isinstance(a, Jet):
        return np.abs(a)
    v = a.value
    if a.order > 0 and np.any(v == 0):
        raise DomainError("abs is not differentiable at 0")
    return a * np.sign(v)


def reciprocal(a):
    if not isinstance(a, Jet):
        a = np.asarray(a, dtype=float)
        if np.any(a == 0):
            raise DomainError("division by zero")
        return 1.0 / a
    v = a.value
    if np.any(v == 0):
        raise DomainError("division by zero")
    ds = [(-1) ** m / v ** (m + 1) for m in range(a.order + 1)]
    return _compose(a, ds)


def integer_power(a, k):
    if k < 0:
        return integer_power(reciprocal(a), -k)
    if k == 0:
        if isinstance(a, Jet):
            return Jet.constant(np.ones(a.shape), a.n, a.order)
        return np.ones_like(np.asarray(a, dtype=float))
    out = a
    for _ in range(k - 1):
        out = out * a
    return out


def power(a, q):
    q = float(q)
    if q.is_integer():
        return integer_power(a, int(q))
    v = a.value if isinstance(a, Jet) else np.asarray(a, dtype=float)
    if np.any(v <= 0):
        raise DomainError("real power of non-positive base")
    if not isinstance(a, Jet):
        return v**q
    return exp(log(a) * q)


# tensor helpers

_LETTERS = "abcdefghijklmnopqrstuvwxy"


def _diag(c, sub, is_jet):
    """Collapse repeated letters of one operand to its diagonal."""
    uniq = "".join(dict.fromkeys(sub))
    if uniq == sub:
        return c, sub
    if is_jet:
        return np.einsum(f"{sub}z->{uniq}z", c), uniq
    return np.einsum(f"{sub}->{uniq}", c), uniq


def _align(c, sub, full, is_jet):
    perm = [sub.index(ch) for ch in full if ch in sub]
    if is_jet:
        perm = perm + [len(sub)]
    c = np.transpose(c, perm)
    shape = []
    k = 0
    for ch in full:
        if ch in sub:
            shape.append(c.shape[k])
            k += 1
        else:
            shape.append(1)
    if is_jet:
        shape.append(c.shape[-1])
    return c.reshape(shape)


def _contract2(a, asub, b, bsub, keep):
    aj, bj = isinstance(a, Jet), isinstance(b, Jet)
    if not aj and not bj:
        return np.einsum(f"{asub},{bsub}->{keep}", a, b)
    if aj and not bj:
        return Jet(np.einsum(f"{asub}z,{bsub}->{keep}z", a.c, np.asarray(b, float)), a.n, a.order)
    if bj and not aj:
        return Jet(np.einsum(f"{asub},{bsub}z->{keep}z", np.asarray(a, float), b.c), b.n, b.order)
    a, b = a._coerce(b)
    full = "".join(dict.fromkeys(asub + bsub))
    ac = _align(a.c, asub, full, True)
    bc = _align(b.c, bsub, full, True)
    prod = _mul_arrays(ac, bc, a.n, a.order)
    out = np.einsum(f"{full}z->{keep}z", prod)
    return Jet(out, a.n, a.order)


def jeinsum(spec, *ops):
    """``numpy.einsum`` over arrays of jets (plain arrays act as constants)."""
    ins, out = spec.replace(" ", "").split("->")
    subs = ins.split(",")
    if len(subs) != len(ops):
        raise ValueError("operand count does not match subscripts")
    items = []
    for op, sub in zip(ops, subs):
        if isinstance(op, Jet):
            c, s = _diag(op.c, sub, True)
            items.append((Jet(c, op.n, op.order), s))
        else:
            c, s = _diag(np.asarray(op, dtype=float), sub, False)
            items.append((c, s))
    cur, cur_sub = items[0]
    for k in range(1, len(items)):
        nxt, nsub = items[k]
        later = set(out).union(*[set(s) for _, s in items[k + 1:]])
        keep = "".join(ch for ch in dict.fromkeys(cur_sub + nsub) if ch in later)
        cur = _contract2(cur, cur_sub, nxt, nsub, keep)
        cur_sub = keep
    if isinstance(cur, Jet):
        return Jet(np.einsum(f"{cur_sub}z->{out}z", cur.c), cur.n, cur.order)
    return np.einsum(f"{cur_sub}->{out}", cur)


def matmul(a, b):
    return _batched_matmul(a, b)


def _shape(x):
    return x.shape if isinstance(x, Jet) else np.shape(x)


def _batched_matmul(a, b):
    nb = len(_shape(a)) - 2
    lead = _LETTERS[:nb]
    return jeinsum(f"{lead}ij,{lead}jk->{lead}ik", a, b)


def inv(m):
    """Inverse of a jet-valued square matrix (last two axes)."""
    m0 = m.value
    if np.any(np.abs(np.linalg.det(m0)) < 1e-14):
        raise DomainError("singular matrix")
    m0inv = np.linalg.inv(m0)
    bar = Jet(m.c.copy(), m.n, m.order)
    bar.c[..., 0] = 0.0
    x = -_batched_matmul(m0inv, bar)
    eye = np.broadcast_to(np.eye(m0.shape[-1]), m0.shape)
    total = Jet.constant(eye, m.n, m.order)
    p = total
    for _ in range(m.order):
        p = _batched_matmul(p, x)
        total = total + p
    return _batched_matmul(total, m0inv)


def logabsdet(m):
    """ln|det m| as a jet, plus the sign of the determinant value."""
    m0 = m.value
    sign, ld = np.linalg.slogdet(m0)
    if np.any(sign == 0):
        raise DomainError("singular matrix")
    bar = Jet(m.c.copy(), m.n, m.order)
    bar.c[..., 0] = 0.0
    y = _batched_matmul(np.linalg.inv(m0), bar)
    total = Jet.constant(ld, m.n, m.order)
    p = None
    for k in range(1, m.order + 1):
        p = y if p is None else _batched_matmul(p, y)
        nb = len(p.shape) - 2
        lead = _LETTERS[:nb]
        tr = jeinsum(f"{lead}ii->{lead}", p)
        total = total + tr * ((-1) ** (k + 1) / k)
    return total, sign


def det(m):
    ld, sign = logabsdet(m)
    return exp(ld) * sign


def transpose(x, axes):
    if isinstance(x, Jet):
        return Jet(np.transpose(x.c, tuple(axes) + (len(axes),)), x.n, x.order)
    return np.transpose(x, axes)


def value(x):
    return x.value if isinstance(x, Jet) else np.asarray(x, dtype=float)


def compose(outer, inner):
    """Jet of ``outer(inner(x))``.

    ``outer`` is an array of jets in ``m`` variables expanded at ``y0``;
    ``inner`` is a list of ``m`` scalar jets in the x variables whose values
    are ``y0``.  The result carries the lower of the two orders.
    """
    t = outer.table
    m = outer.n
    if len(inner) != m:
        raise ValueError("inner jet count does not match outer variable count")
    order = min(outer.order, min(j.order for j in inner))
    bars = []
    for j in inner:
        j = j.truncate(order)
        b = Jet(j.c.copy(), j.n, order)
        b.c[..., 0] = 0.0
        bars.append(b)
    n = bars[0].n
    # powers[i][k] = bar_i ** k
    powers = []
    for b in bars:
        row = [Jet.constant(1.0, n, order)]
        for _ in range(order):
            row.append(row[-1] * b)
        powers.append(row)
    out = Jet.constant(np.zeros(outer.shape), n, order)
    for k in range(ncoef(m, order)):
        mi = t.index[k]
        mono = None
        for i in range(m):
            if mi[i]:
                mono = powers[i][mi[i]] if mono is None else mono * powers[i][mi[i]]
        coef = outer.c[..., k]
        if mono is None:
            out = out + coef
        else:
            out = out + Jet(coef[..., None] * mono.c, n, order)
    return out
